#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lsblt/datastore.hpp"

namespace lsblt {

// Binary classification metrics. Labels are 0/1 ints; a score predicts
// positive when score >= threshold.

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  bool operator==(const Confusion&) const = default;
};

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels,
                       double threshold);

// Mann-Whitney statistic (wins + 0.5 ties) / (P N) via average ranks.
// Throws std::invalid_argument on single-class input, NaN scores, length
// mismatch, or labels outside {0, 1}.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// 2TP / (2TP + FP + FN); 0 when the denominator is 0.
double f1_score(const Confusion& c);
double f1_binary(std::span<const double> scores, std::span<const int> labels, double threshold);

struct BestF1 {
  double f1 = 0.0;
  double threshold = 0.0;

  bool operator==(const BestF1&) const = default;
};
// Maximum F1 over distinct score thresholds; the higher threshold wins ties.
BestF1 best_f1(std::span<const double> scores, std::span<const int> labels);

// alpha = tp + 1, beta = fp + 1; variance of Beta(alpha, beta).
double beta_variance(std::uint64_t tp, std::uint64_t fp);

// Maximum beta variance below this is considered statistically certain.
inline constexpr double kBetaVarianceCertainty = 0.005;

struct PrecisionRecallPoint {
  double target = 0.0;     // requested precision pi
  double threshold = 0.0;  // +inf when unattained
  double precision = 0.0;
  double recall = 0.0;
  Confusion counts;
  double beta_variance = 0.0;
  bool attained = false;

  bool operator==(const PrecisionRecallPoint&) const = default;
};

// For each target pi in (0, 1]: the maximum recall over thresholds (distinct
// scores plus +inf) whose precision >= pi. Among thresholds reaching that
// recall the highest one is reported. Unattainable targets yield recall 0,
// threshold +inf, attained = false.
std::vector<PrecisionRecallPoint> recall_at_precision(std::span<const double> scores,
                                                      std::span<const int> labels,
                                                      std::span<const double> targets);

// Throws std::invalid_argument on an empty curve.
double max_beta_variance(std::span<const PrecisionRecallPoint> curve);

inline const std::vector<double> kDefaultPrecisionTargets = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

struct EvalReport {
  double auc = 0.0;
  double f1 = 0.0;  // at f1_threshold
  double f1_threshold = 0.5;
  BestF1 best_f1;
  std::vector<PrecisionRecallPoint> curve;
  double max_beta_variance = 0.0;
  bool certain = false;  // max_beta_variance < kBetaVarianceCertainty
  std::size_t positives = 0;
  std::size_t negatives = 0;

  bool operator==(const EvalReport&) const = default;
};

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    std::span<const double> targets = kDefaultPrecisionTargets,
                    double f1_threshold = 0.5);

// Zero vs non-zero binarization of a labeled multiclass set: score is
// 1 - p_0, label is (label != 0). Throws DataError on unlabeled records.
struct BinarizedScores {
  std::vector<double> scores;
  std::vector<int> labels;
};
BinarizedScores binarize(const SampleSet& labeled);

std::string to_json(const EvalReport& report);
EvalReport eval_report_from_json(std::string_view text);
void save_eval_report(const EvalReport& report, const std::filesystem::path& path);

// Fixed-width table: AUC, F1, then one R@P column per curve point.
std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace lsblt
