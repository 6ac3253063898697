#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lsblt/datastore.hpp"
#include "lsblt/vlmae.hpp"

namespace lsblt {

struct ReferenceConfig {
  std::size_t steps = 300;
  double learning_rate = 0.5;
  double momentum = 0.9;
  double l2 = 1e-4;
  std::size_t hidden = 0;  // 0: softmax(W h + b); otherwise one tanh hidden layer
  std::uint64_t seed = 0;
};

// Softmax classifier over latent embeddings. Output weights start at zero, so
// an untrained model predicts the uniform distribution.
class ReferenceClassifier {
 public:
  ReferenceClassifier() = default;
  ReferenceClassifier(std::size_t dim, std::size_t classes, const ReferenceConfig& config);

  std::vector<double> predict(std::span<const double> embedding) const;

  // Copy of `set` with every record's probs replaced by this model's output.
  SampleSet rescore(const SampleSet& set) const;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t classes() const noexcept { return classes_; }
  double training_loss() const noexcept { return training_loss_; }

  friend ReferenceClassifier train_reference_classifier(const SampleSet& labeled,
                                                        const ReferenceConfig& config);

 private:
  std::vector<double> logits(std::span<const double> embedding,
                             std::vector<double>* hidden_out) const;

  std::size_t dim_ = 0;
  std::size_t classes_ = 0;
  std::size_t hidden_ = 0;
  Matrix w1_;  // hidden x dim (unused without a hidden layer)
  std::vector<double> b1_;
  Matrix w2_;  // classes x (hidden or dim)
  std::vector<double> b2_;
  double training_loss_ = 0.0;
};

// Full-batch gradient descent with momentum on mean cross-entropy + l2.
// Deterministic given the config. Throws DataError when the set is empty,
// has unlabeled records, or misses a class.
ReferenceClassifier train_reference_classifier(const SampleSet& labeled,
                                               const ReferenceConfig& config = {});

}  // namespace lsblt
