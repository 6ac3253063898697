#include "lsblt/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "lsblt/error.hpp"
#include "lsblt/random.hpp"
#include "lsblt/parallel.hpp"

namespace lsblt {
namespace {

// Descending score, ascending id.
bool ranks_before(const AcquisitionScore& a, const AcquisitionScore& b) {
  if (a.value != b.value) return a.value > b.value;
  return a.id < b.id;
}

std::vector<AcquisitionScore> ranked(const SampleSet& set, Acquisition a, std::size_t threads) {
  auto scores = score_all(set, a, threads);
  std::sort(scores.begin(), scores.end(), ranks_before);
  return scores;
}

}  // namespace

std::string_view to_string(Acquisition a) {
  switch (a) {
    case Acquisition::kLeastConfident: return "least_confident";
    case Acquisition::kMargin: return "margin";
    case Acquisition::kMaxEntropy: return "max_entropy";
  }
  return "least_confident";
}

Acquisition parse_acquisition(std::string_view s) {
  for (auto a : {Acquisition::kLeastConfident, Acquisition::kMargin, Acquisition::kMaxEntropy}) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown acquisition strategy '" + std::string(s) + "'");
}

Strategy strategy_of(Acquisition a) {
  switch (a) {
    case Acquisition::kLeastConfident: return Strategy::kLeastConfident;
    case Acquisition::kMargin: return Strategy::kMargin;
    case Acquisition::kMaxEntropy: return Strategy::kMaxEntropy;
  }
  return Strategy::kLeastConfident;
}

double acquisition_score(std::span<const double> p, Acquisition a) {
  if (p.empty()) throw std::invalid_argument("acquisition_score: empty probability vector");
  switch (a) {
    case Acquisition::kLeastConfident:
      return 1.0 - *std::max_element(p.begin(), p.end());
    case Acquisition::kMargin: {
      if (p.size() < 2) throw std::invalid_argument("margin requires at least 2 classes");
      double first = -INFINITY;
      double second = -INFINITY;
      for (double v : p) {
        if (v > first) {
          second = first;
          first = v;
        } else if (v > second) {
          second = v;
        }
      }
      return -(first - second);
    }
    case Acquisition::kMaxEntropy: {
      double h = 0.0;
      for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
      }
      return h;
    }
  }
  return 0.0;
}

double expected_score(std::span<const double> p) {
  double s = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) s += static_cast<double>(c) * p[c];
  return s;
}

double multiclass_loss(std::span<const double> p, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= p.size()) {
    throw std::invalid_argument("multiclass_loss: label " + std::to_string(label) +
                                " outside [0, " + std::to_string(p.size()) + ")");
  }
  return std::abs(expected_score(p) - static_cast<double>(label));
}

double mean_multiclass_loss(const SampleSet& set, const std::vector<std::string>& ids) {
  if (ids.empty()) return 0.0;
  double total = 0.0;
  for (const auto& id : ids) {
    const auto& r = set.at(id);
    if (!r.label) throw DataError("record '" + id + "' has no label");
    total += multiclass_loss(r.probs, *r.label);
  }
  return total / static_cast<double>(ids.size());
}

std::vector<AcquisitionScore> score_all(const SampleSet& set, Acquisition a,
                                        std::size_t threads) {
  std::vector<AcquisitionScore> out(set.size());
  parallel_chunks(set.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = {set[i].id, a, acquisition_score(set[i].probs, a)};
    }
  });
  return out;
}

SelectionBatch select_statistical(const SampleSet& set, Acquisition a, std::size_t budget,
                                  std::size_t threads) {
  if (budget > set.size()) {
    throw std::invalid_argument("select_statistical: budget " + std::to_string(budget) +
                                " exceeds set size " + std::to_string(set.size()));
  }
  auto scores = score_all(set, a, threads);
  std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(budget),
                    scores.end(), ranks_before);
  SelectionBatch batch;
  batch.strategy = strategy_of(a);
  batch.entries.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) {
    batch.entries.push_back({scores[i].id, batch.strategy, scores[i].value, {}, {}});
  }
  return batch;
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> ratios) {
  if (ratios.empty()) throw std::invalid_argument("apportion: no ratios");
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("apportion: bad ratio");
    sum += r;
  }
  if (sum <= 0.0) throw std::invalid_argument("apportion: ratios sum to zero");
  std::vector<std::size_t> out(ratios.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double exact = static_cast<double>(total) * ratios[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  // Largest remainder first; earlier slot wins ties.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) {
    ++out[remainders[i % remainders.size()].second];
  }
  return out;
}

SelectionBatch select_random(const SampleSet& set, std::size_t budget, std::uint64_t seed) {
  if (budget > set.size()) {
    throw std::invalid_argument("select_random: budget " + std::to_string(budget) +
                                " exceeds set size " + std::to_string(set.size()));
  }
  std::vector<std::size_t> order(set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  SelectionBatch batch;
  batch.strategy = Strategy::kRandom;
  for (std::size_t i = 0; i < budget; ++i) {
    batch.entries.push_back({set[order[i]].id, Strategy::kRandom, {}, {}, {}});
  }
  return batch;
}

SelectionBatch select_statistical_mix(const SampleSet& set, std::size_t budget,
                                      std::span<const double> ratios,
                                      const std::vector<std::string>& exclude,
                                      std::size_t threads) {
  if (ratios.size() != 3) throw std::invalid_argument("statistical mix needs 3 ratios");
  std::unordered_set<std::string> taken(exclude.begin(), exclude.end());
  std::size_t available = 0;
  for (const auto& r : set) available += taken.contains(r.id) ? 0 : 1;
  if (budget > available) {
    throw std::invalid_argument("select_statistical_mix: budget " + std::to_string(budget) +
                                " exceeds available " + std::to_string(available));
  }
  const auto counts = apportion(budget, ratios);
  const Acquisition order[3] = {Acquisition::kLeastConfident, Acquisition::kMargin,
                                Acquisition::kMaxEntropy};
  SelectionBatch batch;
  batch.strategy = Strategy::kLeastConfident;
  for (int s = 0; s < 3; ++s) {
    if (counts[s] == 0) continue;
    const auto scores = ranked(set, order[s], threads);
    std::size_t picked = 0;
    for (const auto& sc : scores) {
      if (picked == counts[s]) break;
      if (!taken.insert(sc.id).second) continue;
      batch.entries.push_back({sc.id, strategy_of(order[s]), sc.value, {}, {}});
      ++picked;
    }
  }
  return batch;
}

SeedSet select_seeds(const SampleSet& labeled, const SeedRule& rule) {
  if (labeled.empty()) throw DataError("select_seeds: no labeled records");
  if (rule.mode == SeedRule::Mode::kQuantile && !(rule.value >= 0.0 && rule.value <= 1.0)) {
    throw std::invalid_argument("select_seeds: quantile must be in [0, 1]");
  }
  std::vector<SeedEntry> all;
  all.reserve(labeled.size());
  for (const auto& r : labeled) {
    if (!r.label) throw DataError("select_seeds: record '" + r.id + "' is unlabeled");
    all.push_back({r.id, multiclass_loss(r.probs, *r.label)});
  }
  std::sort(all.begin(), all.end(), [](const SeedEntry& a, const SeedEntry& b) {
    if (a.loss != b.loss) return a.loss > b.loss;
    return a.id < b.id;
  });
  SeedSet out;
  out.rule = rule;
  if (rule.mode == SeedRule::Mode::kThreshold) {
    for (auto& e : all) {
      if (e.loss > rule.value) out.seeds.push_back(std::move(e));
    }
  } else {
    // Guard the ceil against q*N landing a hair above an integer.
    const double exact = rule.value * static_cast<double>(all.size());
    auto n = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    n = std::min(n, all.size());
    out.seeds.assign(std::make_move_iterator(all.begin()),
                     std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n)));
  }
  return out;
}

void write_seeds(const SeedSet& seeds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& s : seeds.seeds) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["loss"] = s.loss;
    out << j.dump() << '\n';
  }
}

SeedSet read_seeds(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  SeedSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.seeds.push_back({j.at("id").get<std::string>(), j.at("loss").get<double>()});
    } catch (const std::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lsblt
