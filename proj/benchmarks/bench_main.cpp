#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "lsblt/latent_knn.hpp"
#include "lsblt/lookalike.hpp"
#include "lsblt/metrics.hpp"
#include "lsblt/random.hpp"
#include "lsblt/uncertainty.hpp"
#include "lsblt/vlmae.hpp"

namespace {

using namespace lsblt;

SampleSet random_pool(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SampleRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord r;
    r.id = "p" + std::to_string(i);
    r.embedding.resize(dim);
    for (auto& x : r.embedding) x = rng.normal(0.0, 1.0);
    const double a = rng.uniform(0.0, 1.0);
    r.probs = {a, 1.0 - a};
    records.push_back(std::move(r));
  }
  return SampleSet::infer(std::move(records));
}

void BM_TopK(benchmark::State& state) {
  const auto pool = random_pool(static_cast<std::size_t>(state.range(0)), 128, 1);
  const auto& query = pool[0];
  KnnConfig cfg;
  cfg.threads = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(top_k(query, pool, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TopK)->Args({10000, 1})->Args({10000, 4})->Args({100000, 1});

void BM_RocAuc(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> s(n);
  std::vector<int> l(n);
  for (std::size_t i = 0; i < n; ++i) {
    l[i] = rng.bernoulli(0.3) ? 1 : 0;
    s[i] = rng.normal(l[i], 1.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc(s, l));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

void BM_StatisticalSelect(benchmark::State& state) {
  const auto pool = random_pool(static_cast<std::size_t>(state.range(0)), 16, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(select_statistical(pool, Acquisition::kLeastConfident, 130, 1));
  }
}
BENCHMARK(BM_StatisticalSelect)->Arg(10000)->Arg(100000);

void BM_AttentionFuse(benchmark::State& state) {
  Rng rng(4);
  const auto d = static_cast<std::size_t>(state.range(0));
  FusionInit init;
  const auto p = init_fusion_params(d, d, 2, init);
  Matrix audio(64, d);
  for (auto& x : audio.data) x = rng.normal(0.0, 1.0);
  std::vector<double> cls(d);
  for (auto& x : cls) x = rng.normal(0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(attention_fuse(p, audio, cls));
}
BENCHMARK(BM_AttentionFuse)->Arg(16)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
