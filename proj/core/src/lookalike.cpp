#include "lsblt/lookalike.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lsblt/error.hpp"
#include "lsblt/random.hpp"

namespace lsblt {
namespace {

using Json = nlohmann::ordered_json;

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double linear(std::span<const double> w, double b, std::span<const double> h) {
  double z = b;
  for (std::size_t i = 0; i < w.size(); ++i) z += w[i] * h[i];
  return z;
}

struct Problem {
  const std::vector<MismatchExample>* examples;
  std::vector<double> sample_weights;
  double weight_total = 0.0;
  double l2 = 0.0;
  std::size_t dim = 0;

  double objective(std::span<const double> w, double b) const {
    double loss = 0.0;
    for (std::size_t i = 0; i < examples->size(); ++i) {
      const auto& ex = (*examples)[i];
      const double z = linear(w, b, ex.embedding);
      loss += sample_weights[i] * (softplus(z) - (ex.mismatch ? z : 0.0));
    }
    double reg = 0.0;
    for (double v : w) reg += v * v;
    return loss / weight_total + 0.5 * l2 * reg;
  }

  // Gradient into (gw, gb).
  void gradient(std::span<const double> w, double b, std::vector<double>& gw, double& gb) const {
    std::fill(gw.begin(), gw.end(), 0.0);
    gb = 0.0;
    for (std::size_t i = 0; i < examples->size(); ++i) {
      const auto& ex = (*examples)[i];
      const double r = sample_weights[i] * (stable_sigmoid(linear(w, b, ex.embedding)) - ex.mismatch);
      for (std::size_t k = 0; k < dim; ++k) gw[k] += r * ex.embedding[k];
      gb += r;
    }
    for (std::size_t k = 0; k < dim; ++k) gw[k] = gw[k] / weight_total + l2 * w[k];
    gb /= weight_total;
  }
};

}  // namespace

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::vector<MismatchExample> build_mismatch_dataset(const SampleSet& labeled) {
  std::vector<MismatchExample> out;
  out.reserve(labeled.size());
  for (const auto& r : labeled) {
    if (!r.label) throw DataError("build_mismatch_dataset: record '" + r.id + "' is unlabeled");
    const int mismatch = static_cast<int>(argmax(r.probs)) != *r.label ? 1 : 0;
    out.push_back({r.id, r.embedding, mismatch});
  }
  return out;
}

std::vector<MismatchExample> subsample_negatives(const std::vector<MismatchExample>& examples,
                                                 double ratio, std::uint64_t seed) {
  if (ratio <= 0.0) return examples;
  std::vector<std::size_t> negatives;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].mismatch) {
      ++positives;
    } else {
      negatives.push_back(i);
    }
  }
  const auto keep_n = std::min(
      negatives.size(), static_cast<std::size_t>(std::floor(ratio * static_cast<double>(positives))));
  Rng rng(seed);
  rng.shuffle(negatives);
  std::vector<char> keep(examples.size(), 0);
  for (std::size_t i = 0; i < keep_n; ++i) keep[negatives[i]] = 1;
  std::vector<MismatchExample> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].mismatch || keep[i]) out.push_back(examples[i]);
  }
  return out;
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

Problem make_problem(const std::vector<MismatchExample>& examples, const LookalikeConfig& config,
                     std::size_t& positives, std::size_t& negatives) {
  if (examples.empty()) throw DataError("train_lookalike: no examples");
  Problem p;
  p.examples = &examples;
  p.l2 = config.l2;
  p.dim = examples.front().embedding.size();
  positives = negatives = 0;
  for (const auto& ex : examples) {
    if (ex.embedding.size() != p.dim) {
      throw DataError("train_lookalike: example '" + ex.id + "' has inconsistent dimension");
    }
    for (double v : ex.embedding) {
      if (!std::isfinite(v)) throw DataError("train_lookalike: non-finite feature in '" + ex.id + "'");
    }
    if (ex.mismatch != 0 && ex.mismatch != 1) {
      throw DataError("train_lookalike: mismatch label must be 0/1 for '" + ex.id + "'");
    }
    (ex.mismatch ? positives : negatives) += 1;
  }
  if (positives == 0 || negatives == 0) {
    throw DataError("train_lookalike: both match and mismatch examples are required");
  }
  const double n = static_cast<double>(examples.size());
  const double w_pos = config.balance_classes ? n / (2.0 * static_cast<double>(positives)) : 1.0;
  const double w_neg = config.balance_classes ? n / (2.0 * static_cast<double>(negatives)) : 1.0;
  p.sample_weights.reserve(examples.size());
  for (const auto& ex : examples) {
    p.sample_weights.push_back(ex.mismatch ? w_pos : w_neg);
    p.weight_total += p.sample_weights.back();
  }
  return p;
}

}  // namespace

double lookalike_objective(const LookalikeModel& model,
                           const std::vector<MismatchExample>& examples,
                           const LookalikeConfig& config) {
  std::size_t pos = 0, neg = 0;
  const Problem p = make_problem(examples, config, pos, neg);
  if (model.weights.size() != p.dim) throw DataError("lookalike_objective: dim mismatch");
  return p.objective(model.weights, model.bias);
}

LookalikeModel train_lookalike(const std::vector<MismatchExample>& examples,
                               const LookalikeConfig& config) {
  LookalikeModel model;
  const Problem p = make_problem(examples, config, model.positives, model.negatives);
  model.l2 = config.l2;
  model.weights.assign(p.dim, 0.0);
  if (config.init_scale > 0.0) {
    Rng rng(config.seed);
    for (auto& w : model.weights) w = rng.normal(0.0, config.init_scale);
    model.bias = rng.normal(0.0, config.init_scale);
  }

  constexpr double kArmijo = 1e-4;
  double loss = p.objective(model.weights, model.bias);
  if (!std::isfinite(loss)) throw DataError("train_lookalike: non-finite initial loss");
  model.loss_trace.push_back(loss);

  std::vector<double> gw(p.dim);
  std::vector<double> trial(p.dim);
  double gb = 0.0;
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    p.gradient(model.weights, model.bias, gw, gb);
    double gnorm2 = gb * gb;
    for (double g : gw) gnorm2 += g * g;

    double step = config.initial_step;
    bool accepted = false;
    double trial_bias = 0.0;
    double trial_loss = loss;
    for (std::size_t h = 0; h <= config.max_halvings; ++h, step *= config.step_shrink) {
      for (std::size_t k = 0; k < p.dim; ++k) trial[k] = model.weights[k] - step * gw[k];
      trial_bias = model.bias - step * gb;
      trial_loss = p.objective(trial, trial_bias);
      if (trial_loss <= loss - kArmijo * step * gnorm2) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      model.converged = true;
      break;
    }
    model.weights.swap(trial);
    model.bias = trial_bias;
    const double improvement = loss - trial_loss;
    loss = trial_loss;
    model.loss_trace.push_back(loss);
    model.iterations = it + 1;
    if (improvement < config.tolerance) {
      model.converged = true;
      break;
    }
  }
  model.final_loss = loss;
  return model;
}

double lookalike_score(const LookalikeModel& model, std::span<const double> embedding) {
  if (embedding.size() != model.weights.size()) {
    throw DataError("lookalike_score: embedding length " + std::to_string(embedding.size()) +
                    " != model dim " + std::to_string(model.weights.size()));
  }
  return stable_sigmoid(linear(model.weights, model.bias, embedding));
}

SelectionBatch lt_filter(const LookalikeModel& model, const SelectionBatch& batch,
                         const SampleSet& source, double threshold) {
  SelectionBatch out;
  out.round = batch.round;
  out.strategy = Strategy::kLsbLt;
  for (const auto& e : batch.entries) {
    const SampleRecord* r = source.find(e.id);
    if (!r) throw DataError("lt_filter: id '" + e.id + "' not found in embedding source");
    const double s = lookalike_score(model, r->embedding);
    if (s >= threshold) {
      SelectionEntry kept = e;
      kept.strategy = Strategy::kLsbLt;
      kept.lookalike_score = s;
      out.entries.push_back(std::move(kept));
    }
  }
  return out;
}

double evaluate_lookalike(const LookalikeModel& model,
                          const std::vector<MismatchExample>& held_out) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(held_out.size());
  labels.reserve(held_out.size());
  for (const auto& ex : held_out) {
    scores.push_back(lookalike_score(model, ex.embedding));
    labels.push_back(ex.mismatch);
  }
  try {
    return roc_auc(scores, labels);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("evaluate_lookalike: ") + e.what());
  }
}

std::string to_json(const LookalikeModel& model) {
  Json j;
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["metadata"] = {{"iterations", model.iterations},
                   {"final_loss", model.final_loss},
                   {"l2", model.l2},
                   {"positives", model.positives},
                   {"negatives", model.negatives},
                   {"converged", model.converged},
                   {"loss_trace", model.loss_trace}};
  return j.dump(2);
}

LookalikeModel lookalike_from_json(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    LookalikeModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    const auto& md = j.at("metadata");
    m.iterations = md.at("iterations").get<std::size_t>();
    m.final_loss = md.at("final_loss").get<double>();
    m.l2 = md.at("l2").get<double>();
    m.positives = md.at("positives").get<std::size_t>();
    m.negatives = md.at("negatives").get<std::size_t>();
    m.converged = md.at("converged").get<bool>();
    m.loss_trace = md.at("loss_trace").get<std::vector<double>>();
    if (!std::isfinite(m.final_loss)) throw DataError("lookalike model has non-finite loss");
    return m;
  } catch (const Json::exception& e) {
    throw DataError(std::string("lookalike model: ") + e.what());
  }
}

void save_lookalike(const LookalikeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << to_json(model) << '\n';
}

LookalikeModel load_lookalike(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return lookalike_from_json(ss.str());
}

}  // namespace lsblt
