#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsblt/datastore.hpp"
#include "lsblt/uncertainty.hpp"

namespace lsblt {

enum class Metric { kCosine, kEuclidean };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

struct KnnConfig {
  std::size_t k = 3;
  Metric metric = Metric::kCosine;
  bool dedupe = true;
  bool exclude_labeled = true;
  std::size_t threads = 1;
};

struct Neighbor {
  std::string id;
  double distance;

  bool operator==(const Neighbor&) const = default;
};

// Ascending (distance, id); at most k entries, no duplicate ids.
struct NeighborList {
  std::string query_id;
  std::vector<Neighbor> neighbors;

  bool operator==(const NeighborList&) const = default;
};

// Strict (distance, id) order used for every ranking in this module.
inline bool closer(const Neighbor& a, const Neighbor& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.id < b.id;
}

// euclidean: ||a - b||_2. cosine: 1 - a.b / (|a||b|), clamped to [0, 2].
// Accumulates in double. Throws std::invalid_argument on length mismatch and
// on a zero vector under cosine.
double pairwise_distance(std::span<const double> a, std::span<const double> b, Metric metric);

// Brute-force search index over a pool. Caches squared norms so repeated
// queries skip them; distances are bit-identical to pairwise_distance.
class ExactIndex {
 public:
  ExactIndex(const SampleSet& pool, Metric metric);

  // k nearest pool records to `embedding`, skipping `exclude_id` and any
  // record whose `skip` flag is set. Pool partitioned into `threads` chunks,
  // each with a bounded max-heap; merged with the same comparator.
  NeighborList search(std::string_view query_id, std::span<const double> embedding,
                      std::size_t k, std::size_t threads = 1,
                      const std::vector<char>* skip = nullptr) const;

  const SampleSet& pool() const noexcept { return *pool_; }
  Metric metric() const noexcept { return metric_; }

 private:
  const SampleSet* pool_;
  Metric metric_;
  std::vector<double> sq_norms_;
};

// Throws DataError on dimension mismatch or a zero vector under cosine.
NeighborList top_k(const SampleRecord& query, const SampleSet& pool, const KnnConfig& cfg);

// Per-seed neighbor lists against the (optionally labeled-excluded) pool, in
// seed order; duplicates across seeds retained.
std::vector<NeighborList> lsb_neighbor_lists(const SeedSet& seeds, const SampleSet& labeled,
                                             const SampleSet& pool, const KnnConfig& cfg);

// Union of per-seed top-k, each candidate once with its smallest
// (distance, seed id). Entries ordered by (distance, id); score = distance,
// seed_id = nearest seed. Requires cfg.dedupe, since a SelectionBatch holds
// unique ids; lsb_neighbor_lists exposes the multiset view.
SelectionBatch lsb_expand(const SeedSet& seeds, const SampleSet& labeled, const SampleSet& pool,
                          const KnnConfig& cfg);

}  // namespace lsblt
