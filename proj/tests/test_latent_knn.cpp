#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lsblt/error.hpp"
#include "lsblt/latent_knn.hpp"
#include "lsblt/random.hpp"
#include "oracles.hpp"

namespace lsblt {
namespace {

SampleRecord point(std::string id, std::vector<double> h, std::optional<int> label = {}) {
  SampleRecord r;
  r.id = std::move(id);
  r.embedding = std::move(h);
  r.probs = {0.5, 0.5};
  r.label = label;
  return r;
}

std::string pid(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06zu", prefix, i);
  return buf;
}

// Integer-valued coordinates so distance ties are common.
SampleSet grid_pool(Rng& rng, std::size_t n, std::size_t dim, const char* prefix = "p") {
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> h(dim);
    for (auto& x : h) x = static_cast<double>(rng.index(3)) - 1.0;
    h[0] += 2.0;  // never the zero vector
    records.push_back(point(pid(prefix, i), h));
  }
  return SampleSet::infer(std::move(records));
}

SampleSet gaussian_pool(Rng& rng, std::size_t n, std::size_t dim, const char* prefix = "p") {
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < n; ++i) records.push_back(point(pid(prefix, i), oracle::random_vector(rng, dim)));
  return SampleSet::infer(std::move(records));
}

TEST(Distance, Examples) {
  const std::vector<double> a = {1, 2};
  EXPECT_EQ(pairwise_distance(a, a, Metric::kEuclidean), 0.0);
  EXPECT_NEAR(pairwise_distance(a, a, Metric::kCosine), 0.0, 1e-15);
  const std::vector<double> x = {1, 0}, y = {0, 1};
  EXPECT_NEAR(pairwise_distance(x, y, Metric::kCosine), 1.0, 1e-15);
  EXPECT_NEAR(pairwise_distance(x, y, Metric::kEuclidean), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(pairwise_distance(a, std::vector<double>{4, 6}, Metric::kEuclidean), 5.0, 1e-15);
}

TEST(Distance, Errors) {
  EXPECT_THROW(pairwise_distance(std::vector<double>{0, 0}, std::vector<double>{1, 0},
                                 Metric::kCosine),
               std::invalid_argument);
  EXPECT_THROW(pairwise_distance(std::vector<double>{1}, std::vector<double>{1, 0},
                                 Metric::kEuclidean),
               std::invalid_argument);
}

TEST(Distance, MatchesTextbookFormula) {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = oracle::random_vector(rng, 1 + rng.index(40));
    const auto b = oracle::random_vector(rng, a.size(), 3.0);
    EXPECT_NEAR(pairwise_distance(a, b, Metric::kEuclidean), oracle::euclidean(a, b), 1e-12);
    EXPECT_NEAR(pairwise_distance(a, b, Metric::kCosine), oracle::cosine(a, b), 1e-12);
    const double c = pairwise_distance(a, b, Metric::kCosine);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 2.0);
  }
}

TEST(TopK, ExactDuplicateRanksFirst) {
  Rng rng(2);
  auto pool = gaussian_pool(rng, 50, 6);
  const auto query = point("q", pool[17].embedding);
  for (auto metric : {Metric::kCosine, Metric::kEuclidean}) {
    KnnConfig cfg;
    cfg.metric = metric;
    const auto nl = top_k(query, pool, cfg);
    ASSERT_EQ(nl.neighbors.size(), 3u);
    EXPECT_EQ(nl.neighbors[0].id, pool[17].id);
    EXPECT_NEAR(nl.neighbors[0].distance, 0.0, 1e-15);
  }
}

TEST(TopK, DegenerateKReturnsWholePoolSorted) {
  Rng rng(3);
  const auto pool = grid_pool(rng, 20, 3);
  KnnConfig cfg;
  cfg.k = 100;
  cfg.metric = Metric::kEuclidean;
  const auto query = point("q", {1, 0, 0});
  const auto nl = top_k(query, pool, cfg);
  EXPECT_EQ(nl.neighbors, oracle::knn_by_full_sort(query.embedding, pool, 100, cfg.metric));
  EXPECT_EQ(nl.neighbors.size(), 20u);
}

TEST(TopK, ExcludesQueryIdAndRejectsDimMismatch) {
  Rng rng(4);
  const auto pool = gaussian_pool(rng, 30, 4);
  KnnConfig cfg;
  cfg.k = 30;
  const auto nl = top_k(pool[5], pool, cfg);
  EXPECT_EQ(nl.neighbors.size(), 29u);
  for (const auto& n : nl.neighbors) EXPECT_NE(n.id, pool[5].id);
  EXPECT_THROW(top_k(point("q", {1, 2}), pool, cfg), DataError);
  EXPECT_THROW(top_k(point("q", {0, 0, 0, 0}), pool, cfg), DataError);
}

TEST(TopK, MatchesFullSortOracleWithTiesAtAnyThreadCount) {
  Rng rng(5);
  const auto pool = grid_pool(rng, 3000, 8);
  for (int q = 0; q < 10; ++q) {
    const auto query = point("q", {2, 1, 0, -1, 0, 1, 0, 0});
    for (auto metric : {Metric::kCosine, Metric::kEuclidean}) {
      for (std::size_t k : {1u, 3u, 10u, 57u}) {
        const auto expected = oracle::knn_by_full_sort(query.embedding, pool, k, metric);
        for (std::size_t threads : {1u, 2u, 7u}) {
          KnnConfig cfg{k, metric, true, true, threads};
          ASSERT_EQ(top_k(query, pool, cfg).neighbors, expected)
              << "k=" << k << " threads=" << threads;
        }
      }
    }
  }
}

TEST(TopK, CosineOrderIsScaleInvariant) {
  Rng rng(6);
  const auto pool = gaussian_pool(rng, 400, 5);
  std::vector<SampleRecord> scaled_records;
  for (const auto& r : pool) {
    auto s = r;
    const double c = std::exp(rng.uniform(-3.0, 3.0));
    for (auto& x : s.embedding) x *= c;
    scaled_records.push_back(std::move(s));
  }
  const auto scaled = SampleSet::infer(scaled_records);
  KnnConfig cfg;
  cfg.k = 10;
  for (int q = 0; q < 20; ++q) {
    const auto query = point("q", oracle::random_vector(rng, 5));
    std::vector<std::string> a, b;
    for (const auto& n : top_k(query, pool, cfg).neighbors) a.push_back(n.id);
    for (const auto& n : top_k(query, scaled, cfg).neighbors) b.push_back(n.id);
    EXPECT_EQ(a, b);
  }
}

TEST(TopK, NonSelectedCandidatesAreNoCloser) {
  Rng rng(7);
  const auto pool = grid_pool(rng, 60, 3);
  KnnConfig cfg;
  cfg.k = 5;
  const auto query = point("q", {2, 0, 1});
  const auto nl = top_k(query, pool, cfg);
  std::set<std::string> chosen;
  for (const auto& n : nl.neighbors) chosen.insert(n.id);
  for (std::size_t i = 1; i < nl.neighbors.size(); ++i) {
    EXPECT_LE(nl.neighbors[i - 1].distance, nl.neighbors[i].distance);
  }
  for (const auto& r : pool) {
    if (chosen.contains(r.id)) continue;
    const Neighbor other{r.id, pairwise_distance(query.embedding, r.embedding, cfg.metric)};
    EXPECT_TRUE(closer(nl.neighbors.back(), other)) << r.id;
  }
}

TEST(LsbExpand, SingleSeedFindsItsDuplicate) {
  const auto labeled = SampleSet::infer({point("s", {1, 2}, 0), point("t", {-3, 1}, 0)});
  const auto pool = SampleSet::infer(
      {point("a", {5, -1}), point("dup", {1, 2}), point("b", {-1, -1}), point("c", {0, 1})});
  SeedSet seeds;
  seeds.seeds = {{"s", 2.0}};
  KnnConfig cfg;
  cfg.k = 1;
  const auto b = lsb_expand(seeds, labeled, pool, cfg);
  ASSERT_EQ(b.entries.size(), 1u);
  EXPECT_EQ(b.entries[0].id, "dup");
  EXPECT_EQ(b.entries[0].seed_id, "s");
  EXPECT_EQ(b.strategy, Strategy::kLsb);
}

TEST(LsbExpand, SharedNeighborDedupesToCloserSeed) {
  const auto labeled = SampleSet::infer({point("s1", {1, 0.2}, 0), point("s2", {1, 0.1}, 0)});
  const auto pool = SampleSet::infer({point("a", {1, 0}), point("far", {-1, 0})});
  SeedSet seeds;
  seeds.seeds = {{"s1", 3.0}, {"s2", 1.0}};
  KnnConfig cfg;
  cfg.k = 1;
  cfg.metric = Metric::kEuclidean;
  const auto b = lsb_expand(seeds, labeled, pool, cfg);
  ASSERT_EQ(b.entries.size(), 1u);
  EXPECT_EQ(b.entries[0].seed_id, "s2");

  // Equal distances: the smaller seed id wins.
  const auto tied = SampleSet::infer({point("s1", {1, 0.1}, 0), point("s0", {1, -0.1}, 0)});
  SeedSet both;
  both.seeds = {{"s1", 1.0}, {"s0", 1.0}};
  const auto bt = lsb_expand(both, tied, pool, cfg);
  ASSERT_EQ(bt.entries.size(), 1u);
  EXPECT_EQ(bt.entries[0].seed_id, "s0");
}

TEST(LsbExpand, ExcludesLabeledIdsAndRejectsUnknownSeed) {
  const auto labeled = SampleSet::infer({point("s", {1, 0}, 0), point("x", {1, 0.01}, 0)});
  const auto pool = SampleSet::infer({point("x", {1, 0.01}), point("y", {1, 0.5})});
  SeedSet seeds;
  seeds.seeds = {{"s", 1.0}};
  KnnConfig cfg;
  cfg.k = 1;
  EXPECT_EQ(lsb_expand(seeds, labeled, pool, cfg).ids(), std::vector<std::string>{"y"});
  cfg.exclude_labeled = false;
  EXPECT_EQ(lsb_expand(seeds, labeled, pool, cfg).ids(), std::vector<std::string>{"x"});
  seeds.seeds.push_back({"missing", 1.0});
  EXPECT_THROW(lsb_expand(seeds, labeled, pool, cfg), DataError);
}

TEST(LsbExpand, MatchesPerSeedUnionOracle) {
  Rng rng(8);
  const auto pool = gaussian_pool(rng, 5000, 12);
  const auto labeled = gaussian_pool(rng, 200, 12, "s");
  SeedSet seeds;
  for (std::size_t i = 0; i < 50; ++i) seeds.seeds.push_back({labeled[i * 4].id, 1.0});
  for (auto metric : {Metric::kCosine, Metric::kEuclidean}) {
    KnnConfig cfg;
    cfg.metric = metric;
    std::map<std::string, Neighbor> best;  // candidate -> (distance, seed id)
    std::size_t with_multiplicity = 0;
    for (const auto& s : seeds.seeds) {
      const auto nn = oracle::knn_by_full_sort(labeled.at(s.id).embedding, pool, 3, metric);
      with_multiplicity += nn.size();
      for (const auto& n : nn) {
        const Neighbor cand{s.id, n.distance};
        auto it = best.find(n.id);
        if (it == best.end() || closer(cand, it->second)) best[n.id] = cand;
      }
    }
    std::vector<Neighbor> expected;
    for (const auto& [id, n] : best) expected.push_back({id, n.distance});
    std::sort(expected.begin(), expected.end(), closer);

    for (std::size_t threads : {1u, 4u}) {
      cfg.threads = threads;
      const auto b = lsb_expand(seeds, labeled, pool, cfg);
      ASSERT_EQ(b.entries.size(), expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) {
        EXPECT_EQ(b.entries[i].id, expected[i].id);
        EXPECT_EQ(*b.entries[i].score, expected[i].distance);
        EXPECT_EQ(*b.entries[i].seed_id, best[expected[i].id].id);
      }
      EXPECT_LE(b.entries.size(), 3 * seeds.size());
    }
    const auto lists = lsb_neighbor_lists(seeds, labeled, pool, cfg);
    std::size_t total = 0;
    for (const auto& l : lists) total += l.neighbors.size();
    EXPECT_EQ(total, with_multiplicity);
    EXPECT_EQ(total, 3 * seeds.size());
  }
}

TEST(LsbExpand, DedupeOffIsRejected) {
  const auto labeled = SampleSet::infer({point("s", {1, 0}, 0)});
  const auto pool = SampleSet::infer({point("a", {1, 1})});
  SeedSet seeds;
  seeds.seeds = {{"s", 1.0}};
  KnnConfig cfg;
  cfg.dedupe = false;
  EXPECT_THROW(lsb_expand(seeds, labeled, pool, cfg), std::invalid_argument);
}

}  // namespace
}  // namespace lsblt
