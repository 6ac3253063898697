#include "lsblt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "lsblt/error.hpp"

namespace lsblt {
namespace {

using Json = nlohmann::ordered_json;

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const int> labels,
                         bool need_both) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  ClassCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw std::invalid_argument("NaN score at index " + std::to_string(i));
    if (labels[i] == 1) {
      ++c.positives;
    } else if (labels[i] == 0) {
      ++c.negatives;
    } else {
      throw std::invalid_argument("label at index " + std::to_string(i) + " is not 0/1");
    }
  }
  if (need_both && (c.positives == 0 || c.negatives == 0)) {
    throw std::invalid_argument("both classes must be present");
  }
  return c;
}

// Cumulative counts at each distinct threshold, highest score first.
struct SweepPoint {
  double threshold;
  std::size_t tp;
  std::size_t fp;
};

std::vector<SweepPoint> sweep(std::span<const double> scores, std::span<const int> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<SweepPoint> out;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    out.push_back({s, tp, fp});
  }
  return out;
}

double precision_of(std::size_t tp, std::size_t fp) {
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

Json confusion_json(const Confusion& c) {
  return Json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels,
                       double threshold) {
  check_inputs(scores, labels, false);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? c.tp : c.fn) += 1;
    } else {
      (predicted ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, true);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of 1-based average ranks of positives; tied groups share the mean rank.
  // Doubled ranks stay integral, so the sum is exact.
  double twice_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_pos += labels[order[j]] == 1 ? 1 : 0;
      ++j;
    }
    const double twice_avg_rank = static_cast<double>(i + 1 + j);
    twice_rank_sum += twice_avg_rank * static_cast<double>(group_pos);
    i = j;
  }
  const double p = static_cast<double>(counts.positives);
  const double n = static_cast<double>(counts.negatives);
  return (twice_rank_sum - p * (p + 1.0)) / (2.0 * p * n);
}

double f1_score(const Confusion& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double f1_binary(std::span<const double> scores, std::span<const int> labels, double threshold) {
  return f1_score(confusion_at(scores, labels, threshold));
}

BestF1 best_f1(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, false);
  BestF1 best{0.0, std::numeric_limits<double>::infinity()};
  for (const auto& pt : sweep(scores, labels)) {
    const Confusion c{pt.tp, pt.fp, counts.positives - pt.tp, counts.negatives - pt.fp};
    const double f1 = f1_score(c);
    if (f1 > best.f1) best = {f1, pt.threshold};
  }
  return best;
}

double beta_variance(std::uint64_t tp, std::uint64_t fp) {
  const double a = static_cast<double>(tp) + 1.0;
  const double b = static_cast<double>(fp) + 1.0;
  const double s = a + b;
  return a * b / (s * s * (s + 1.0));
}

std::vector<PrecisionRecallPoint> recall_at_precision(std::span<const double> scores,
                                                      std::span<const int> labels,
                                                      std::span<const double> targets) {
  for (double t : targets) {
    if (!(t > 0.0 && t <= 1.0)) {
      throw std::invalid_argument("precision target " + std::to_string(t) + " outside (0, 1]");
    }
  }
  const auto counts = check_inputs(scores, labels, true);
  const auto points = sweep(scores, labels);
  std::vector<PrecisionRecallPoint> out;
  out.reserve(targets.size());
  for (double target : targets) {
    PrecisionRecallPoint best;
    best.target = target;
    best.threshold = std::numeric_limits<double>::infinity();
    best.counts = {0, 0, counts.positives, counts.negatives};
    // Thresholds descend, so recall only grows; strict > keeps the highest
    // threshold for a given recall.
    std::size_t best_tp = 0;
    for (const auto& pt : points) {
      if (precision_of(pt.tp, pt.fp) < target) continue;
      if (!best.attained || pt.tp > best_tp) {
        best_tp = pt.tp;
        best.attained = true;
        best.threshold = pt.threshold;
        best.counts = {pt.tp, pt.fp, counts.positives - pt.tp, counts.negatives - pt.fp};
      }
    }
    if (best.attained) {
      best.precision = precision_of(best.counts.tp, best.counts.fp);
      best.recall = static_cast<double>(best.counts.tp) / static_cast<double>(counts.positives);
    }
    best.beta_variance = beta_variance(best.counts.tp, best.counts.fp);
    out.push_back(best);
  }
  return out;
}

double max_beta_variance(std::span<const PrecisionRecallPoint> curve) {
  if (curve.empty()) throw std::invalid_argument("max_beta_variance: empty curve");
  double m = curve.front().beta_variance;
  for (const auto& p : curve) m = std::max(m, p.beta_variance);
  return m;
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    std::span<const double> targets, double f1_threshold) {
  const auto counts = check_inputs(scores, labels, true);
  EvalReport r;
  r.positives = counts.positives;
  r.negatives = counts.negatives;
  r.auc = roc_auc(scores, labels);
  r.f1_threshold = f1_threshold;
  r.f1 = f1_binary(scores, labels, f1_threshold);
  r.best_f1 = best_f1(scores, labels);
  r.curve = recall_at_precision(scores, labels, targets);
  if (!r.curve.empty()) {
    r.max_beta_variance = max_beta_variance(r.curve);
    r.certain = r.max_beta_variance < kBetaVarianceCertainty;
  }
  return r;
}

BinarizedScores binarize(const SampleSet& labeled) {
  BinarizedScores out;
  out.scores.reserve(labeled.size());
  out.labels.reserve(labeled.size());
  for (const auto& r : labeled) {
    if (!r.label) throw DataError("binarize: record '" + r.id + "' is unlabeled");
    out.scores.push_back(1.0 - r.probs.at(0));
    out.labels.push_back(*r.label != 0 ? 1 : 0);
  }
  return out;
}

std::string to_json(const EvalReport& report) {
  Json j;
  j["auc"] = report.auc;
  j["f1"] = report.f1;
  j["f1_threshold"] = report.f1_threshold;
  j["best_f1"] = {{"f1", report.best_f1.f1}, {"threshold", finite_or_null(report.best_f1.threshold)}};
  j["positives"] = report.positives;
  j["negatives"] = report.negatives;
  Json curve = Json::array();
  for (const auto& p : report.curve) {
    curve.push_back({{"target", p.target},
                     {"threshold", finite_or_null(p.threshold)},
                     {"precision", p.precision},
                     {"recall", p.recall},
                     {"counts", confusion_json(p.counts)},
                     {"beta_variance", p.beta_variance},
                     {"attained", p.attained}});
  }
  j["curve"] = std::move(curve);
  j["max_beta_variance"] = report.max_beta_variance;
  j["certain"] = report.certain;
  return j.dump(2);
}

EvalReport eval_report_from_json(std::string_view text) {
  const auto inf = std::numeric_limits<double>::infinity();
  auto number_or_inf = [inf](const Json& v) { return v.is_null() ? inf : v.get<double>(); };
  try {
    const Json j = Json::parse(text);
    EvalReport r;
    r.auc = j.at("auc").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.f1_threshold = j.at("f1_threshold").get<double>();
    r.best_f1 = {j.at("best_f1").at("f1").get<double>(),
                 number_or_inf(j.at("best_f1").at("threshold"))};
    r.positives = j.at("positives").get<std::size_t>();
    r.negatives = j.at("negatives").get<std::size_t>();
    for (const auto& p : j.at("curve")) {
      PrecisionRecallPoint pt;
      pt.target = p.at("target").get<double>();
      pt.threshold = number_or_inf(p.at("threshold"));
      pt.precision = p.at("precision").get<double>();
      pt.recall = p.at("recall").get<double>();
      const auto& c = p.at("counts");
      pt.counts = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(),
                   c.at("fn").get<std::size_t>(), c.at("tn").get<std::size_t>()};
      pt.beta_variance = p.at("beta_variance").get<double>();
      pt.attained = p.at("attained").get<bool>();
      r.curve.push_back(pt);
    }
    r.max_beta_variance = j.at("max_beta_variance").get<double>();
    r.certain = j.at("certain").get<bool>();
    return r;
  } catch (const Json::exception& e) {
    throw DataError(std::string("eval report: ") + e.what());
  }
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << to_json(report) << '\n';
}

std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::string out;
  char buf[64];
  std::size_t name_width = 8;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());

  out += std::string("Strategy") + std::string(name_width - 8 + 2, ' ');
  out += "   AUC     F1";
  if (!rows.empty()) {
    for (const auto& p : rows.front().second.curve) {
      std::snprintf(buf, sizeof buf, "  R@P%-3.0f", p.target * 100.0);
      out += buf;
    }
  }
  out += "  MaxBetaVar\n";
  for (const auto& [name, r] : rows) {
    out += name + std::string(name_width - name.size() + 2, ' ');
    std::snprintf(buf, sizeof buf, "%6.3f %6.3f", r.auc, r.f1);
    out += buf;
    for (const auto& p : r.curve) {
      std::snprintf(buf, sizeof buf, "  %5.3f%s", p.recall, p.attained ? " " : "*");
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "  %10.3e\n", r.max_beta_variance);
    out += buf;
  }
  return out;
}

}  // namespace lsblt
