#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsblt/datastore.hpp"

namespace lsblt {

// Statistical acquisition functions. Larger value = more uncertain for all three.
enum class Acquisition { kLeastConfident, kMargin, kMaxEntropy };

std::string_view to_string(Acquisition a);
Acquisition parse_acquisition(std::string_view s);
Strategy strategy_of(Acquisition a);

// least_confident: 1 - max p; margin: -(p(1) - p(2)); max_entropy: -sum p ln p
// with 0 ln 0 = 0. Throws std::invalid_argument on an empty vector or C < 2
// under margin.
double acquisition_score(std::span<const double> p, Acquisition a);

// Expected ordinal class sum_c c * p_c.
double expected_score(std::span<const double> p);

// |expected_score(p) - label|. Throws std::invalid_argument when label is
// outside [0, C-1].
double multiclass_loss(std::span<const double> p, int label);

// Mean multiclass loss of `ids` resolved in `set`, each against its own label.
// Returns 0 for an empty id list.
double mean_multiclass_loss(const SampleSet& set, const std::vector<std::string>& ids);

struct AcquisitionScore {
  std::string id;
  Acquisition strategy;
  double value;
};

// Scores every record; output in input order. Data-parallel over `threads`.
std::vector<AcquisitionScore> score_all(const SampleSet& set, Acquisition a,
                                        std::size_t threads = 1);

// The `budget` records with largest score, ordered by (-score, id).
SelectionBatch select_statistical(const SampleSet& set, Acquisition a, std::size_t budget,
                                  std::size_t threads = 1);

// `budget` records drawn uniformly without replacement, in draw order.
SelectionBatch select_random(const SampleSet& set, std::size_t budget, std::uint64_t seed);

// Default split of a statistical budget between LC, margin, max-entropy.
inline constexpr std::array<double, 3> kDefaultStatisticalMix = {96.0, 56.0, 181.0};

// Largest-remainder apportionment of `total` by `ratios`; sums to total.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> ratios);

// Mixed statistical batch: LC, then margin, then max-entropy top picks, each
// skipping ids already taken (including `exclude`). Entries keep their
// per-strategy tag.
SelectionBatch select_statistical_mix(const SampleSet& set, std::size_t budget,
                                      std::span<const double> ratios = kDefaultStatisticalMix,
                                      const std::vector<std::string>& exclude = {},
                                      std::size_t threads = 1);

struct SeedRule {
  enum class Mode { kThreshold, kQuantile };
  Mode mode = Mode::kQuantile;
  double value = 0.03;  // s_t in threshold mode, q in quantile mode

  static SeedRule threshold(double s_t) { return {Mode::kThreshold, s_t}; }
  static SeedRule quantile(double q) { return {Mode::kQuantile, q}; }
};

struct SeedEntry {
  std::string id;
  double loss;
};

// Seed badcases ordered by (-loss, id).
struct SeedSet {
  std::vector<SeedEntry> seeds;
  SeedRule rule;

  bool empty() const noexcept { return seeds.empty(); }
  std::size_t size() const noexcept { return seeds.size(); }
};

// Threshold mode keeps loss > s_t; quantile mode keeps the top ceil(q * N).
// Throws DataError when the set is empty or has an unlabeled record.
SeedSet select_seeds(const SampleSet& labeled, const SeedRule& rule);

void write_seeds(const SeedSet& seeds, const std::filesystem::path& path);
SeedSet read_seeds(const std::filesystem::path& path);

}  // namespace lsblt
