#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsblt/datastore.hpp"
#include "lsblt/metrics.hpp"

namespace lsblt {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

// Precomputed audio encoder output H_A: T rows of width d_A.
using AudioSequence = Matrix;

enum class FusionMode { kAvgPool, kAttention };

std::string_view to_string(FusionMode m);
FusionMode parse_fusion_mode(std::string_view s);

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

// Anchor projection P (d_A x d_cls) maps the CLS embedding into the audio
// space; absent means a fixed identity, which needs d_A == d_cls. The head
// maps the fused vector (length d_A + d_cls) through tanh-separated affine
// layers to C logits.
struct FusionParams {
  std::size_t audio_dim = 0;
  std::size_t cls_dim = 0;
  std::size_t num_classes = 0;
  std::optional<Matrix> anchor;
  std::vector<DenseLayer> head;

  std::size_t fused_dim() const noexcept { return audio_dim + cls_dim; }
  std::size_t parameter_count() const;
  bool operator==(const FusionParams&) const = default;
};

struct FusionInit {
  // Hidden widths; empty gives a single linear layer. Default (nullopt) is
  // {fused_dim, 4 * C}: three affine layers.
  std::optional<std::vector<std::size_t>> hidden;
  // Learn P. When false and d_A == d_cls the anchor is a fixed identity.
  bool learn_anchor = true;
  std::uint64_t seed = 0;
};

// Square anchors start at identity; rectangular ones ~ N(0, 1/d_cls).
// Head weights ~ N(0, 1/fan_in), biases zero.
FusionParams init_fusion_params(std::size_t audio_dim, std::size_t cls_dim,
                                std::size_t num_classes, const FusionInit& init = {});

// Checks shapes and finiteness; throws DataError.
void validate_params(const FusionParams& params);

// concat(h_cls, mean over rows). Throws DataError on an empty sequence.
std::vector<double> avg_pool_fuse(const AudioSequence& audio, std::span<const double> cls);

struct AttentionResult {
  std::vector<double> fused;    // concat(pooled, h_cls)
  std::vector<double> weights;  // softmax over T rows
  std::vector<double> logits;   // H_A a / sqrt(d_A)
};

// a = P h_cls; w = softmax(H_A a / sqrt(d_A)); pooled = sum_t w_t H_A[t].
AttentionResult attention_fuse(const FusionParams& params, const AudioSequence& audio,
                               std::span<const double> cls);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

// Head forward pass on a fused vector; returns probabilities.
std::vector<double> classify(const FusionParams& params, std::span<const double> fused);

std::vector<double> fuse(const FusionParams& params, FusionMode mode, const AudioSequence& audio,
                         std::span<const double> cls);

struct ToySample {
  std::string id;
  AudioSequence audio;
  std::vector<double> cls;
  int label = 0;
};

// Records need audio and a label. Throws DataError otherwise.
std::vector<ToySample> toy_samples_from(const SampleSet& set);

struct LossAndGrads {
  double loss = 0.0;
  FusionParams grads;  // same shapes as the params; anchor grad iff anchor learned
};

// Mean cross-entropy over the batch with analytic gradients. Audio rows and
// h_cls are inputs, not parameters. Throws DataError naming the sample when
// the forward pass goes non-finite.
LossAndGrads loss_and_grads(const FusionParams& params, std::span<const ToySample> batch,
                            FusionMode mode);
double batch_loss(const FusionParams& params, std::span<const ToySample> batch, FusionMode mode);

// Named views over every trainable scalar, in a fixed order.
struct ParamBlock {
  std::string name;
  std::span<double> values;
};
std::vector<ParamBlock> parameter_blocks(FusionParams& params);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string block;
  std::size_t index = 0;
  std::size_t checked = 0;
};

inline constexpr std::size_t kGradCheckExhaustiveLimit = 10000;

// Relative error |a - n| / max(|a|, |n|, floor) between `analytic` and central
// differences of batch_loss. Above kGradCheckExhaustiveLimit parameters a
// seeded subset of that size is checked.
GradCheckResult grad_check_against(const FusionParams& params, const FusionParams& analytic,
                                   std::span<const ToySample> batch, FusionMode mode,
                                   double step = 1e-4, std::uint64_t seed = 0);
GradCheckResult grad_check(const FusionParams& params, std::span<const ToySample> batch,
                           FusionMode mode, double step = 1e-4, std::uint64_t seed = 0);

// Entries smaller than this are compared on this absolute scale: at step 1e-4
// the central-difference truncation error alone is near 1e-11.
inline constexpr double kGradCheckFloor = 1e-4;

struct ToyTrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  FusionInit init;
};

// JSON object with every ToyTrainConfig field ("hidden": null means the
// default widths). Unknown keys raise DataError.
std::string to_json(const ToyTrainConfig& config);
ToyTrainConfig toy_config_from_json(std::string_view text, const ToyTrainConfig& base = {});

struct ToyTrainResult {
  FusionParams params;
  EvalReport report;
  double accuracy = 0.0;
  std::vector<double> epoch_loss;
};

// Seeded mini-batch gradient descent with momentum; reports test metrics
// (score 1 - p_0 against label != 0) and argmax accuracy. Throws DataError
// with the epoch index on divergence.
ToyTrainResult train_toy(const std::vector<ToySample>& train, const std::vector<ToySample>& test,
                         const ToyTrainConfig& config, FusionMode mode);

// Same loop starting from given params.
ToyTrainResult train_toy_from(FusionParams params, const std::vector<ToySample>& train,
                              const std::vector<ToySample>& test, const ToyTrainConfig& config,
                              FusionMode mode);

struct ToyEvaluation {
  EvalReport report;
  double accuracy = 0.0;
};
ToyEvaluation evaluate_toy(const FusionParams& params, const std::vector<ToySample>& test,
                           FusionMode mode);

std::string to_json(const FusionParams& params);
FusionParams fusion_params_from_json(std::string_view text);
void save_fusion_params(const FusionParams& params, const std::filesystem::path& path);
FusionParams load_fusion_params(const std::filesystem::path& path);

}  // namespace lsblt
