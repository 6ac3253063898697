#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lsblt/datastore.hpp"
#include "lsblt/metrics.hpp"

namespace lsblt {

// d = 1 when the model's argmax disagrees with the human label.
struct MismatchExample {
  std::string id;
  std::vector<double> embedding;
  int mismatch = 0;
};

// Index of the largest entry; smallest index wins ties.
std::size_t argmax(std::span<const double> v);

// One example per record. Throws DataError on an unlabeled record.
std::vector<MismatchExample> build_mismatch_dataset(const SampleSet& labeled);

// Keeps every positive and at most `ratio` negatives per positive, drawn
// without replacement with `seed`. ratio <= 0 keeps everything. Input order
// is preserved among kept examples.
std::vector<MismatchExample> subsample_negatives(const std::vector<MismatchExample>& examples,
                                                 double ratio, std::uint64_t seed);

struct LookalikeConfig {
  double l2 = 1e-4;
  std::size_t max_iterations = 2000;
  double tolerance = 1e-8;
  double initial_step = 1.0;
  double step_shrink = 0.5;
  std::size_t max_halvings = 30;
  // Inverse-frequency class weights (each class contributes half the loss).
  bool balance_classes = false;
  // Zero start by default; a nonzero scale draws U, b ~ N(0, scale^2) from `seed`.
  double init_scale = 0.0;
  std::uint64_t seed = 0;
};

struct LookalikeModel {
  std::vector<double> weights;  // U
  double bias = 0.0;            // b
  std::size_t iterations = 0;
  double final_loss = 0.0;
  double l2 = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  bool converged = false;
  std::vector<double> loss_trace;  // objective after init and after each iteration

  bool operator==(const LookalikeModel&) const = default;
};

// Regularized objective: weighted mean BCE + (l2 / 2) |U|^2.
double lookalike_objective(const LookalikeModel& model,
                           const std::vector<MismatchExample>& examples,
                           const LookalikeConfig& config);

// Full-batch gradient descent with Armijo backtracking from initial_step,
// halving up to max_halvings times per iteration. Stops when the improvement
// drops below tolerance, no step is accepted, or max_iterations is reached.
// Throws DataError on single-class input or non-finite features.
LookalikeModel train_lookalike(const std::vector<MismatchExample>& examples,
                               const LookalikeConfig& config = {});

// Numerically stable sigmoid(U.h + b). Throws DataError on dim mismatch.
double lookalike_score(const LookalikeModel& model, std::span<const double> embedding);

double stable_sigmoid(double z);

// Keeps entries with lookalike_score >= threshold, in input order, annotated
// with their score and retagged lsb_lt. Ids resolve against `source`.
SelectionBatch lt_filter(const LookalikeModel& model, const SelectionBatch& batch,
                         const SampleSet& source, double threshold);

// ROC AUC of lookalike scores against mismatch labels.
double evaluate_lookalike(const LookalikeModel& model,
                          const std::vector<MismatchExample>& held_out);

std::string to_json(const LookalikeModel& model);
LookalikeModel lookalike_from_json(std::string_view text);
void save_lookalike(const LookalikeModel& model, const std::filesystem::path& path);
LookalikeModel load_lookalike(const std::filesystem::path& path);

}  // namespace lsblt
