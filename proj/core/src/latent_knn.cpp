#include "lsblt/latent_knn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>
#include <unordered_set>

#include "lsblt/error.hpp"
#include "lsblt/parallel.hpp"

namespace lsblt {
namespace {

double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double cosine_from(double ab, double a2, double b2) {
  const double d = 1.0 - ab / std::sqrt(a2 * b2);
  return std::clamp(d, 0.0, 2.0);
}

struct Candidate {
  double distance;
  std::size_t index;
};

}  // namespace

std::string_view to_string(Metric m) {
  return m == Metric::kCosine ? "cosine" : "euclidean";
}

Metric parse_metric(std::string_view s) {
  if (s == "cosine") return Metric::kCosine;
  if (s == "euclidean") return Metric::kEuclidean;
  throw std::invalid_argument("unknown metric '" + std::string(s) + "'");
}

double pairwise_distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("pairwise_distance: length mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  }
  if (metric == Metric::kEuclidean) return euclidean(a, b);
  const double a2 = squared_norm(a);
  const double b2 = squared_norm(b);
  if (a2 == 0.0 || b2 == 0.0) {
    throw std::invalid_argument("pairwise_distance: zero vector under cosine");
  }
  return cosine_from(dot(a, b), a2, b2);
}

ExactIndex::ExactIndex(const SampleSet& pool, Metric metric) : pool_(&pool), metric_(metric) {
  if (metric_ == Metric::kCosine) {
    sq_norms_.reserve(pool.size());
    for (const auto& r : pool) {
      const double n = squared_norm(r.embedding);
      if (n == 0.0) throw DataError("pool record '" + r.id + "' has a zero embedding under cosine");
      sq_norms_.push_back(n);
    }
  }
}

NeighborList ExactIndex::search(std::string_view query_id, std::span<const double> embedding,
                                std::size_t k, std::size_t threads,
                                const std::vector<char>* skip) const {
  if (k == 0) throw std::invalid_argument("top_k: k must be >= 1");
  const SampleSet& pool = *pool_;
  if (!pool.empty() && embedding.size() != pool.dims().embedding_dim) {
    throw DataError("query '" + std::string(query_id) + "' embedding length " +
                    std::to_string(embedding.size()) + " != pool dim " +
                    std::to_string(pool.dims().embedding_dim));
  }
  double q2 = 0.0;
  if (metric_ == Metric::kCosine) {
    q2 = squared_norm(embedding);
    if (q2 == 0.0) {
      throw DataError("query '" + std::string(query_id) + "' has a zero embedding under cosine");
    }
  }

  auto worse = [&pool](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return pool[a.index].id < pool[b.index].id;
  };

  const std::size_t chunks = std::max<std::size_t>(1, threads);
  std::vector<std::vector<Candidate>> partial(chunks);
  parallel_chunks(pool.size(), chunks, [&](std::size_t c, std::size_t begin, std::size_t end) {
    // Max-heap on (distance, id): top is the current worst kept candidate.
    std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> heap(worse);
    for (std::size_t i = begin; i < end; ++i) {
      if (skip && (*skip)[i]) continue;
      const auto& r = pool[i];
      if (r.id == query_id) continue;
      const double d = metric_ == Metric::kCosine
                           ? cosine_from(dot(embedding, r.embedding), q2, sq_norms_[i])
                           : euclidean(embedding, r.embedding);
      Candidate cand{d, i};
      if (heap.size() < k) {
        heap.push(cand);
      } else if (worse(cand, heap.top())) {
        heap.pop();
        heap.push(cand);
      }
    }
    auto& out = partial[c];
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
  });

  std::vector<Candidate> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end(), worse);
  if (merged.size() > k) merged.resize(k);

  NeighborList out;
  out.query_id = std::string(query_id);
  out.neighbors.reserve(merged.size());
  for (const auto& c : merged) out.neighbors.push_back({pool[c.index].id, c.distance});
  return out;
}

NeighborList top_k(const SampleRecord& query, const SampleSet& pool, const KnnConfig& cfg) {
  if (pool.empty()) throw DataError("top_k: empty pool");
  ExactIndex index(pool, cfg.metric);
  return index.search(query.id, query.embedding, cfg.k, cfg.threads);
}

std::vector<NeighborList> lsb_neighbor_lists(const SeedSet& seeds, const SampleSet& labeled,
                                             const SampleSet& pool, const KnnConfig& cfg) {
  std::vector<const SampleRecord*> queries;
  queries.reserve(seeds.size());
  for (const auto& s : seeds.seeds) {
    const SampleRecord* r = labeled.find(s.id);
    if (!r) throw DataError("lsb_expand: seed '" + s.id + "' not found in labeled set");
    queries.push_back(r);
  }
  std::vector<NeighborList> lists;
  if (queries.empty() || pool.empty()) return lists;
  if (labeled.dims().embedding_dim != pool.dims().embedding_dim) {
    throw DataError("lsb_expand: labeled dim " + std::to_string(labeled.dims().embedding_dim) +
                    " != pool dim " + std::to_string(pool.dims().embedding_dim));
  }
  std::vector<char> skip(pool.size(), 0);
  if (cfg.exclude_labeled) {
    for (std::size_t i = 0; i < pool.size(); ++i) skip[i] = labeled.contains(pool[i].id) ? 1 : 0;
  }
  ExactIndex index(pool, cfg.metric);
  lists.reserve(queries.size());
  for (const auto* q : queries) {
    lists.push_back(index.search(q->id, q->embedding, cfg.k, cfg.threads, &skip));
  }
  return lists;
}

SelectionBatch lsb_expand(const SeedSet& seeds, const SampleSet& labeled, const SampleSet& pool,
                          const KnnConfig& cfg) {
  if (!cfg.dedupe) {
    throw std::invalid_argument(
        "lsb_expand: batches hold unique ids; use lsb_neighbor_lists for the multiset view");
  }
  const auto lists = lsb_neighbor_lists(seeds, labeled, pool, cfg);

  struct Best {
    double distance;
    std::string seed_id;
  };
  std::map<std::string, Best> best;
  for (const auto& list : lists) {
    for (const auto& n : list.neighbors) {
      auto [it, inserted] = best.try_emplace(n.id, Best{n.distance, list.query_id});
      if (inserted) continue;
      auto& b = it->second;
      if (n.distance < b.distance || (n.distance == b.distance && list.query_id < b.seed_id)) {
        b = {n.distance, list.query_id};
      }
    }
  }

  std::vector<Neighbor> order;
  order.reserve(best.size());
  for (const auto& [id, b] : best) order.push_back({id, b.distance});
  std::sort(order.begin(), order.end(), closer);

  SelectionBatch batch;
  batch.strategy = Strategy::kLsb;
  batch.entries.reserve(order.size());
  for (const auto& n : order) {
    batch.entries.push_back({n.id, Strategy::kLsb, n.distance, best.at(n.id).seed_id, {}});
  }
  return batch;
}

}  // namespace lsblt
