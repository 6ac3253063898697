#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "lsblt/metrics.hpp"
#include "lsblt/random.hpp"
#include "oracles.hpp"

namespace lsblt {
namespace {

const std::vector<double> kTargets = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

struct Scored {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Positives shifted up by `signal`; scores rounded to `grid` for ties.
Scored noisy_scores(Rng& rng, std::size_t n, double signal, double grid) {
  Scored s;
  for (std::size_t i = 0; i < n; ++i) {
    const int l = rng.bernoulli(0.4) ? 1 : 0;
    double v = rng.normal(l ? signal : 0.0, 1.0);
    if (grid > 0) v = std::round(v / grid) * grid;
    s.scores.push_back(v);
    s.labels.push_back(l);
  }
  s.labels[0] = 1;
  s.labels[1] = 0;
  return s;
}

TEST(RocAuc, Examples) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{3, 3, 3, 3, 3}, std::vector<int>{1, 0, 1, 0, 0}), 0.5);
  EXPECT_THROW(roc_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), std::invalid_argument);
  EXPECT_THROW(roc_auc(std::vector<double>{1, std::nan("")}, std::vector<int>{1, 0}),
               std::invalid_argument);
}

TEST(RocAuc, RankMethodMatchesPairwiseOracle) {
  Rng rng(1);
  for (double grid : {0.0, 0.1, 0.5}) {
    const auto s = noisy_scores(rng, 500, 0.8, grid);
    EXPECT_NEAR(roc_auc(s.scores, s.labels), oracle::pairwise_auc(s.scores, s.labels), 1e-9);
  }
}

TEST(RocAuc, ComplementForTieFreeScores) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = noisy_scores(rng, 80, 0.5, 0.0);
    std::vector<double> neg;
    for (double v : s.scores) neg.push_back(-v);
    EXPECT_NEAR(roc_auc(s.scores, s.labels) + roc_auc(neg, s.labels), 1.0, 1e-12);
  }
}

TEST(F1, Examples) {
  const std::vector<int> labels = {1, 1, 0, 0};
  EXPECT_EQ(f1_binary(std::vector<double>{0.9, 0.8, 0.1, 0.2}, labels, 0.5), 1.0);
  EXPECT_EQ(f1_binary(std::vector<double>{0.1, 0.2, 0.1, 0.2}, labels, 0.5), 0.0);
  // TP=2, FP=1, FN=1
  const std::vector<double> s = {0.9, 0.8, 0.7, 0.1, 0.2};
  const std::vector<int> l = {1, 1, 0, 1, 0};
  EXPECT_EQ(confusion_at(s, l, 0.5), (Confusion{2, 1, 1, 1}));
  EXPECT_NEAR(f1_binary(s, l, 0.5), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(f1_score(Confusion{0, 0, 0, 5}), 0.0);
}

TEST(F1, BestOverThresholdsMatchesScan) {
  Rng rng(3);
  const auto s = noisy_scores(rng, 200, 1.0, 0.25);
  const auto best = best_f1(s.scores, s.labels);
  double expected = 0.0;
  for (double t : s.scores) expected = std::max(expected, f1_binary(s.scores, s.labels, t));
  EXPECT_NEAR(best.f1, expected, 1e-12);
  EXPECT_NEAR(f1_binary(s.scores, s.labels, best.threshold), best.f1, 1e-12);
}

TEST(RecallAtPrecision, PerfectClassifier) {
  const std::vector<double> s = {0.9, 0.8, 0.1, 0.2};
  const std::vector<int> l = {1, 1, 0, 0};
  for (const auto& p : recall_at_precision(s, l, kTargets)) {
    EXPECT_TRUE(p.attained);
    EXPECT_EQ(p.recall, 1.0);
    EXPECT_EQ(p.precision, 1.0);
    EXPECT_EQ(p.threshold, 0.8);
  }
}

TEST(RecallAtPrecision, UnattainableWithConstantScorer) {
  const std::vector<double> s(10, 0.5);
  const std::vector<int> l = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<double> targets = {0.2, 0.5};
  const auto curve = recall_at_precision(s, l, targets);
  EXPECT_TRUE(curve[0].attained);
  EXPECT_EQ(curve[0].recall, 1.0);
  EXPECT_FALSE(curve[1].attained);
  EXPECT_EQ(curve[1].recall, 0.0);
  EXPECT_TRUE(std::isinf(curve[1].threshold));
  EXPECT_THROW(recall_at_precision(s, l, std::vector<double>{0.0}), std::invalid_argument);
  EXPECT_THROW(recall_at_precision(s, l, std::vector<double>{1.5}), std::invalid_argument);
}

TEST(RecallAtPrecision, MatchesSweepOracleExactly) {
  Rng rng(4);
  for (double grid : {0.0, 0.2}) {
    const auto s = noisy_scores(rng, 300, 1.2, grid);
    const auto curve = recall_at_precision(s.scores, s.labels, kTargets);
    for (std::size_t i = 0; i < kTargets.size(); ++i) {
      const auto o = oracle::recall_at_precision_sweep(s.scores, s.labels, kTargets[i]);
      EXPECT_EQ(curve[i].attained, o.attained);
      EXPECT_EQ(curve[i].recall, o.recall);
      EXPECT_EQ(curve[i].threshold, o.threshold);
      EXPECT_EQ(curve[i].counts.tp, o.tp);
      EXPECT_EQ(curve[i].counts.fp, o.fp);
      EXPECT_EQ(curve[i].beta_variance, beta_variance(o.tp, o.fp));
    }
  }
}

TEST(RecallAtPrecision, NonIncreasingInTarget) {
  Rng rng(5);
  std::vector<double> targets;
  for (int i = 1; i <= 100; ++i) targets.push_back(i / 100.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = noisy_scores(rng, 150, rng.uniform(0.0, 2.0), trial % 2 ? 0.3 : 0.0);
    const auto curve = recall_at_precision(s.scores, s.labels, targets);
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i].recall, curve[i - 1].recall);
  }
}

TEST(BetaVariance, Examples) {
  EXPECT_NEAR(beta_variance(0, 0), 1.0 / 12.0, 1e-12);
  EXPECT_NEAR(beta_variance(1, 0), 2.0 / 36.0, 1e-12);
  EXPECT_NEAR(beta_variance(1, 0), 0.055556, 1e-6);
  EXPECT_NEAR(beta_variance(99, 1), 200.0 / (102.0 * 102.0 * 103.0), 1e-12);
  EXPECT_NEAR(beta_variance(99, 1), 1.866e-4, 1e-7);
}

TEST(MaxBetaVariance, Examples) {
  PrecisionRecallPoint a;
  a.beta_variance = beta_variance(0, 0);
  const std::vector<PrecisionRecallPoint> one = {a};
  EXPECT_NEAR(max_beta_variance(one), 1.0 / 12.0, 1e-12);
  EXPECT_FALSE(max_beta_variance(one) < kBetaVarianceCertainty);

  PrecisionRecallPoint b, c;
  b.beta_variance = beta_variance(99, 1);
  c.beta_variance = beta_variance(999, 1);
  const std::vector<PrecisionRecallPoint> two = {b, c};
  EXPECT_EQ(max_beta_variance(two), b.beta_variance);
  EXPECT_TRUE(max_beta_variance(two) < kBetaVarianceCertainty);
  EXPECT_THROW(max_beta_variance(std::vector<PrecisionRecallPoint>{}), std::invalid_argument);
}

TEST(MaxBetaVariance, MoreEvidenceAtSameRatioNeverRaisesMax) {
  for (std::uint64_t tp = 0; tp < 40; ++tp) {
    for (std::uint64_t fp = 0; fp < 40; ++fp) {
      for (std::uint64_t m = 2; m < 6; ++m) {
        EXPECT_LE(beta_variance(m * tp, m * fp), beta_variance(tp, fp));
      }
    }
  }
}

TEST(Evaluate, ReportIsConsistent) {
  Rng rng(6);
  const auto s = noisy_scores(rng, 400, 1.5, 0.0);
  const auto r = evaluate(s.scores, s.labels);
  EXPECT_EQ(r.auc, roc_auc(s.scores, s.labels));
  EXPECT_EQ(r.curve.size(), kDefaultPrecisionTargets.size());
  double m = 0;
  for (const auto& p : r.curve) m = std::max(m, p.beta_variance);
  EXPECT_EQ(r.max_beta_variance, m);
  EXPECT_EQ(r.certain, m < kBetaVarianceCertainty);
  EXPECT_EQ(eval_report_from_json(to_json(r)), r);
  EXPECT_FALSE(format_report_table({{"run", r}}).empty());
}

TEST(Evaluate, JsonKeepsUnattainedPoints) {
  const std::vector<double> s(10, 0.5);
  const std::vector<int> l = {1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  const auto r = evaluate(s, l);
  EXPECT_EQ(eval_report_from_json(to_json(r)), r);
}

}  // namespace
}  // namespace lsblt
