#include "lsblt/vlmae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lsblt/error.hpp"
#include "lsblt/random.hpp"

namespace lsblt {
namespace {

using Json = nlohmann::ordered_json;

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw DataError(std::string(what) + " has a non-finite entry");
  }
}

// a = P h (or h itself for the fixed identity anchor).
std::vector<double> anchor_of(const FusionParams& params, std::span<const double> cls) {
  if (!params.anchor) return {cls.begin(), cls.end()};
  const Matrix& p = *params.anchor;
  std::vector<double> a(p.rows, 0.0);
  for (std::size_t r = 0; r < p.rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < p.cols; ++c) s += p(r, c) * cls[c];
    a[r] = s;
  }
  return a;
}

void check_inputs(const FusionParams& params, const AudioSequence& audio,
                  std::span<const double> cls) {
  if (audio.rows == 0) throw DataError("audio sequence is empty");
  if (audio.cols != params.audio_dim) {
    throw DataError("audio width " + std::to_string(audio.cols) + " != d_A " +
                    std::to_string(params.audio_dim));
  }
  if (cls.size() != params.cls_dim) {
    throw DataError("CLS length " + std::to_string(cls.size()) + " != d_cls " +
                    std::to_string(params.cls_dim));
  }
}

// Activations of every head layer for one fused input; acts[0] is the input,
// acts.back() the logits.
std::vector<std::vector<double>> head_forward(const FusionParams& params,
                                              std::span<const double> fused) {
  std::vector<std::vector<double>> acts;
  acts.reserve(params.head.size() + 1);
  acts.emplace_back(fused.begin(), fused.end());
  for (std::size_t l = 0; l < params.head.size(); ++l) {
    const auto& layer = params.head[l];
    const auto& x = acts.back();
    std::vector<double> z(layer.weight.rows);
    for (std::size_t r = 0; r < layer.weight.rows; ++r) {
      double s = layer.bias[r];
      const auto w = layer.weight.row(r);
      for (std::size_t c = 0; c < w.size(); ++c) s += w[c] * x[c];
      z[r] = l + 1 < params.head.size() ? std::tanh(s) : s;
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

FusionParams zeros_like(const FusionParams& p) {
  FusionParams g = p;
  if (g.anchor) std::fill(g.anchor->data.begin(), g.anchor->data.end(), 0.0);
  for (auto& layer : g.head) {
    std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  return g;
}

Json matrix_json(const Matrix& m) {
  return Json{{"shape", {m.rows, m.cols}}, {"data", m.data}};
}

Matrix matrix_from_json(const Json& j) {
  Matrix m;
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw DataError("matrix shape must have two entries");
  m.rows = shape[0];
  m.cols = shape[1];
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw DataError("matrix data does not match shape");
  return m;
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m;
  m.rows = rows.size();
  m.cols = rows.empty() ? 0 : rows.front().size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rows) {
    if (r.size() != m.cols) throw DataError("ragged rows");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

std::string_view to_string(FusionMode m) {
  return m == FusionMode::kAttention ? "attention" : "avg_pool";
}

FusionMode parse_fusion_mode(std::string_view s) {
  if (s == "attention") return FusionMode::kAttention;
  if (s == "avg_pool") return FusionMode::kAvgPool;
  throw std::invalid_argument("unknown fusion mode '" + std::string(s) + "'");
}

std::size_t FusionParams::parameter_count() const {
  std::size_t n = anchor ? anchor->data.size() : 0;
  for (const auto& l : head) n += l.weight.data.size() + l.bias.size();
  return n;
}

FusionParams init_fusion_params(std::size_t audio_dim, std::size_t cls_dim,
                                std::size_t num_classes, const FusionInit& init) {
  if (audio_dim == 0 || cls_dim == 0 || num_classes < 2) {
    throw std::invalid_argument("init_fusion_params: need d_A, d_cls >= 1 and C >= 2");
  }
  FusionParams p;
  p.audio_dim = audio_dim;
  p.cls_dim = cls_dim;
  p.num_classes = num_classes;
  Rng rng(init.seed);
  if (audio_dim == cls_dim) {
    if (init.learn_anchor) p.anchor = Matrix::identity(audio_dim);
  } else {
    Matrix a(audio_dim, cls_dim);
    const double sd = 1.0 / std::sqrt(static_cast<double>(cls_dim));
    for (auto& v : a.data) v = rng.normal(0.0, sd);
    p.anchor = std::move(a);
  }
  const std::vector<std::size_t> hidden =
      init.hidden.value_or(std::vector<std::size_t>{p.fused_dim(), 4 * num_classes});
  std::size_t in = p.fused_dim();
  auto add_layer = [&](std::size_t out) {
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    const double sd = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : layer.weight.data) v = rng.normal(0.0, sd);
    p.head.push_back(std::move(layer));
    in = out;
  };
  for (std::size_t h : hidden) add_layer(h);
  add_layer(num_classes);
  return p;
}

void validate_params(const FusionParams& p) {
  if (p.audio_dim == 0 || p.cls_dim == 0 || p.num_classes < 2) {
    throw DataError("fusion params: bad dimensions");
  }
  if (p.anchor) {
    if (p.anchor->rows != p.audio_dim || p.anchor->cols != p.cls_dim) {
      throw DataError("fusion params: anchor must be d_A x d_cls");
    }
    check_finite(p.anchor->data, "anchor");
  } else if (p.audio_dim != p.cls_dim) {
    throw DataError("fusion params: identity anchor needs d_A == d_cls");
  }
  if (p.head.empty()) throw DataError("fusion params: empty head");
  std::size_t in = p.fused_dim();
  for (const auto& l : p.head) {
    if (l.weight.cols != in || l.bias.size() != l.weight.rows ||
        l.weight.data.size() != l.weight.rows * l.weight.cols) {
      throw DataError("fusion params: inconsistent head layer shapes");
    }
    check_finite(l.weight.data, "head weight");
    check_finite(l.bias, "head bias");
    in = l.weight.rows;
  }
  if (in != p.num_classes) throw DataError("fusion params: head does not end in C logits");
}

std::vector<double> avg_pool_fuse(const AudioSequence& audio, std::span<const double> cls) {
  if (audio.rows == 0) throw DataError("avg_pool_fuse: empty audio sequence");
  std::vector<double> out(cls.begin(), cls.end());
  std::vector<double> mean(audio.cols, 0.0);
  for (std::size_t t = 0; t < audio.rows; ++t) {
    const auto row = audio.row(t);
    for (std::size_t j = 0; j < audio.cols; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(audio.rows);
  out.insert(out.end(), mean.begin(), mean.end());
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

AttentionResult attention_fuse(const FusionParams& params, const AudioSequence& audio,
                               std::span<const double> cls) {
  check_inputs(params, audio, cls);
  check_finite(audio.data, "audio");
  check_finite(cls, "CLS embedding");
  const auto a = anchor_of(params, cls);
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.audio_dim));
  AttentionResult r;
  r.logits.resize(audio.rows);
  for (std::size_t t = 0; t < audio.rows; ++t) {
    const auto row = audio.row(t);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * a[j];
    r.logits[t] = s * scale;
  }
  r.weights = softmax(r.logits);
  r.fused.assign(params.audio_dim, 0.0);
  for (std::size_t t = 0; t < audio.rows; ++t) {
    const auto row = audio.row(t);
    for (std::size_t j = 0; j < row.size(); ++j) r.fused[j] += r.weights[t] * row[j];
  }
  r.fused.insert(r.fused.end(), cls.begin(), cls.end());
  return r;
}

std::vector<double> classify(const FusionParams& params, std::span<const double> fused) {
  if (fused.size() != params.fused_dim()) {
    throw DataError("classify: fused length " + std::to_string(fused.size()) + " != head input " +
                    std::to_string(params.fused_dim()));
  }
  const auto acts = head_forward(params, fused);
  return softmax(acts.back());
}

std::vector<double> fuse(const FusionParams& params, FusionMode mode, const AudioSequence& audio,
                         std::span<const double> cls) {
  if (mode == FusionMode::kAttention) return attention_fuse(params, audio, cls).fused;
  check_inputs(params, audio, cls);
  return avg_pool_fuse(audio, cls);
}

std::vector<ToySample> toy_samples_from(const SampleSet& set) {
  std::vector<ToySample> out;
  out.reserve(set.size());
  for (const auto& r : set) {
    if (!r.audio) throw DataError("record '" + r.id + "' has no audio sequence");
    if (!r.label) throw DataError("record '" + r.id + "' is unlabeled");
    out.push_back({r.id, Matrix::from_rows(*r.audio), r.embedding, *r.label});
  }
  return out;
}

LossAndGrads loss_and_grads(const FusionParams& params, std::span<const ToySample> batch,
                            FusionMode mode) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
  LossAndGrads out;
  out.grads = zeros_like(params);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.audio_dim));
  const std::size_t n_layers = params.head.size();

  for (const auto& s : batch) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= params.num_classes) {
      throw std::invalid_argument("loss_and_grads: label out of range for '" + s.id + "'");
    }
    AttentionResult att;
    std::vector<double> fused;
    if (mode == FusionMode::kAttention) {
      att = attention_fuse(params, s.audio, s.cls);
      fused = att.fused;
    } else {
      check_inputs(params, s.audio, s.cls);
      fused = avg_pool_fuse(s.audio, s.cls);
    }
    const auto acts = head_forward(params, fused);
    const auto& logits = acts.back();
    const double loss = log_sum_exp(logits) - logits[static_cast<std::size_t>(s.label)];
    if (!std::isfinite(loss)) throw DataError("non-finite loss at sample '" + s.id + "'");
    out.loss += loss * inv_b;

    // dL/dlogits = p - onehot(label), scaled by 1/B.
    std::vector<double> g = softmax(logits);
    g[static_cast<std::size_t>(s.label)] -= 1.0;
    for (double& v : g) v *= inv_b;

    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& layer = params.head[l];
      auto& glayer = out.grads.head[l];
      const auto& x = acts[l];
      for (std::size_t r = 0; r < layer.weight.rows; ++r) {
        auto gw = glayer.weight.row(r);
        for (std::size_t c = 0; c < x.size(); ++c) gw[c] += g[r] * x[c];
        glayer.bias[r] += g[r];
      }
      std::vector<double> gx(layer.weight.cols, 0.0);
      for (std::size_t r = 0; r < layer.weight.rows; ++r) {
        const auto w = layer.weight.row(r);
        for (std::size_t c = 0; c < w.size(); ++c) gx[c] += w[c] * g[r];
      }
      if (l > 0) {
        // acts[l] = tanh(z); d tanh = 1 - tanh^2.
        for (std::size_t c = 0; c < gx.size(); ++c) gx[c] *= 1.0 - x[c] * x[c];
      }
      g = std::move(gx);
    }

    if (mode == FusionMode::kAttention && params.anchor) {
      // g is dL/dfused; the pooled part occupies the first d_A entries.
      const auto& audio = s.audio;
      std::vector<double> dw(audio.rows);
      double mean_dw = 0.0;
      for (std::size_t t = 0; t < audio.rows; ++t) {
        const auto row = audio.row(t);
        double d = 0.0;
        for (std::size_t j = 0; j < params.audio_dim; ++j) d += row[j] * g[j];
        dw[t] = d;
        mean_dw += att.weights[t] * d;
      }
      std::vector<double> da(params.audio_dim, 0.0);
      for (std::size_t t = 0; t < audio.rows; ++t) {
        const double dlogit = att.weights[t] * (dw[t] - mean_dw) * scale;
        const auto row = audio.row(t);
        for (std::size_t j = 0; j < params.audio_dim; ++j) da[j] += dlogit * row[j];
      }
      Matrix& gp = *out.grads.anchor;
      for (std::size_t r = 0; r < gp.rows; ++r) {
        for (std::size_t c = 0; c < gp.cols; ++c) gp(r, c) += da[r] * s.cls[c];
      }
    }
  }
  return out;
}

double batch_loss(const FusionParams& params, std::span<const ToySample> batch, FusionMode mode) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double total = 0.0;
  for (const auto& s : batch) {
    const auto fused = fuse(params, mode, s.audio, s.cls);
    const auto acts = head_forward(params, fused);
    total += log_sum_exp(acts.back()) - acts.back()[static_cast<std::size_t>(s.label)];
  }
  return total / static_cast<double>(batch.size());
}

std::vector<ParamBlock> parameter_blocks(FusionParams& params) {
  std::vector<ParamBlock> blocks;
  if (params.anchor) blocks.push_back({"anchor", params.anchor->data});
  for (std::size_t l = 0; l < params.head.size(); ++l) {
    blocks.push_back({"head" + std::to_string(l) + ".weight", params.head[l].weight.data});
    blocks.push_back({"head" + std::to_string(l) + ".bias", params.head[l].bias});
  }
  return blocks;
}

GradCheckResult grad_check_against(const FusionParams& params, const FusionParams& analytic,
                                   std::span<const ToySample> batch, FusionMode mode, double step,
                                   std::uint64_t seed) {
  FusionParams probe = params;
  FusionParams grads = analytic;
  auto blocks = parameter_blocks(probe);
  const auto grad_blocks = parameter_blocks(grads);
  if (blocks.size() != grad_blocks.size()) {
    throw std::invalid_argument("grad_check: analytic gradient shape mismatch");
  }

  struct Coord {
    std::size_t block;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].values.size() != grad_blocks[b].values.size()) {
      throw std::invalid_argument("grad_check: analytic gradient shape mismatch");
    }
    for (std::size_t i = 0; i < blocks[b].values.size(); ++i) coords.push_back({b, i});
  }
  if (coords.size() > kGradCheckExhaustiveLimit) {
    Rng rng(seed);
    rng.shuffle(coords);
    coords.resize(kGradCheckExhaustiveLimit);
  }

  GradCheckResult result;
  for (const auto& c : coords) {
    double& v = blocks[c.block].values[c.index];
    const double saved = v;
    v = saved + step;
    const double up = batch_loss(probe, batch, mode);
    v = saved - step;
    const double down = batch_loss(probe, batch, mode);
    v = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = grad_blocks[c.block].values[c.index];
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > result.max_relative_error || result.checked == 0) {
      result.max_relative_error = rel;
      result.block = blocks[c.block].name;
      result.index = c.index;
    }
    ++result.checked;
  }
  return result;
}

GradCheckResult grad_check(const FusionParams& params, std::span<const ToySample> batch,
                           FusionMode mode, double step, std::uint64_t seed) {
  const auto lg = loss_and_grads(params, batch, mode);
  return grad_check_against(params, lg.grads, batch, mode, step, seed);
}

ToyEvaluation evaluate_toy(const FusionParams& params, const std::vector<ToySample>& test,
                           FusionMode mode) {
  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t correct = 0;
  for (const auto& s : test) {
    const auto p = classify(params, fuse(params, mode, s.audio, s.cls));
    scores.push_back(1.0 - p[0]);
    labels.push_back(s.label != 0 ? 1 : 0);
    const auto pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    correct += pred == s.label ? 1 : 0;
  }
  ToyEvaluation out;
  try {
    out.report = evaluate(scores, labels);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("evaluate_toy: ") + e.what());
  }
  out.accuracy = test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
  return out;
}

ToyTrainResult train_toy_from(FusionParams params, const std::vector<ToySample>& train,
                              const std::vector<ToySample>& test, const ToyTrainConfig& config,
                              FusionMode mode) {
  if (!(config.learning_rate > 0.0) || config.batch_size == 0) {
    throw std::invalid_argument("train_toy: learning rate and batch size must be positive");
  }
  if (train.empty() && config.epochs > 0) throw DataError("train_toy: empty training set");
  validate_params(params);

  FusionParams velocity = zeros_like(params);
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  ToyTrainResult result;
  std::vector<ToySample> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
      LossAndGrads lg;
      try {
        lg = loss_and_grads(params, batch, mode);
      } catch (const DataError& e) {
        throw DataError("train_toy diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      epoch_loss += lg.loss;
      ++batches;
      auto p_blocks = parameter_blocks(params);
      auto v_blocks = parameter_blocks(velocity);
      const auto g_blocks = parameter_blocks(lg.grads);
      for (std::size_t b = 0; b < p_blocks.size(); ++b) {
        for (std::size_t i = 0; i < p_blocks[b].values.size(); ++i) {
          double& v = v_blocks[b].values[i];
          v = config.momentum * v - config.learning_rate * g_blocks[b].values[i];
          p_blocks[b].values[i] += v;
        }
      }
    }
    const double mean_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1));
    if (!std::isfinite(mean_loss)) {
      throw DataError("train_toy diverged at epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(mean_loss);
  }
  const auto eval = evaluate_toy(params, test, mode);
  result.report = eval.report;
  result.accuracy = eval.accuracy;
  result.params = std::move(params);
  return result;
}

ToyTrainResult train_toy(const std::vector<ToySample>& train, const std::vector<ToySample>& test,
                         const ToyTrainConfig& config, FusionMode mode) {
  const ToySample* ref = !train.empty() ? &train.front() : (!test.empty() ? &test.front() : nullptr);
  if (!ref) throw DataError("train_toy: no samples");
  std::size_t classes = 2;
  for (const auto* set : {&train, &test}) {
    for (const auto& s : *set) classes = std::max(classes, static_cast<std::size_t>(s.label) + 1);
  }
  FusionInit init = config.init;
  init.seed = config.seed;
  return train_toy_from(init_fusion_params(ref->audio.cols, ref->cls.size(), classes, init), train,
                        test, config, mode);
}

std::string to_json(const FusionParams& params) {
  Json j;
  j["audio_dim"] = params.audio_dim;
  j["cls_dim"] = params.cls_dim;
  j["num_classes"] = params.num_classes;
  j["anchor"] = params.anchor ? matrix_json(*params.anchor) : Json(nullptr);
  Json head = Json::array();
  for (const auto& l : params.head) {
    head.push_back({{"weight", matrix_json(l.weight)}, {"bias", l.bias}});
  }
  j["head"] = std::move(head);
  j["activation"] = "tanh";
  return j.dump(2);
}

FusionParams fusion_params_from_json(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    FusionParams p;
    p.audio_dim = j.at("audio_dim").get<std::size_t>();
    p.cls_dim = j.at("cls_dim").get<std::size_t>();
    p.num_classes = j.at("num_classes").get<std::size_t>();
    if (!j.at("anchor").is_null()) p.anchor = matrix_from_json(j.at("anchor"));
    for (const auto& l : j.at("head")) {
      p.head.push_back({matrix_from_json(l.at("weight")), l.at("bias").get<std::vector<double>>()});
    }
    if (j.contains("activation") && j.at("activation").get<std::string>() != "tanh") {
      throw DataError("fusion params: unsupported activation");
    }
    validate_params(p);
    return p;
  } catch (const Json::exception& e) {
    throw DataError(std::string("fusion params: ") + e.what());
  }
}

void save_fusion_params(const FusionParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << to_json(params) << '\n';
}

FusionParams load_fusion_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return fusion_params_from_json(ss.str());
}

std::string to_json(const ToyTrainConfig& c) {
  Json j;
  j["learning_rate"] = c.learning_rate;
  j["momentum"] = c.momentum;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["hidden"] = c.init.hidden ? Json(*c.init.hidden) : Json(nullptr);
  j["learn_anchor"] = c.init.learn_anchor;
  j["init_seed"] = c.init.seed;
  return j.dump(2);
}

ToyTrainConfig toy_config_from_json(std::string_view text, const ToyTrainConfig& base) {
  ToyTrainConfig c = base;
  try {
    const Json j = Json::parse(text);
    if (!j.is_object()) throw DataError("toy config: expected a JSON object");
    static const char* const kKeys[] = {"learning_rate", "momentum",     "epochs",   "batch_size",
                                        "seed",          "hidden",       "learn_anchor", "init_seed"};
    for (const auto& [key, _] : j.items()) {
      if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
        throw DataError("toy config: unknown key '" + key + "'");
      }
    }
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("momentum")) c.momentum = j.at("momentum").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("hidden")) {
      if (j.at("hidden").is_null()) {
        c.init.hidden.reset();
      } else {
        c.init.hidden = j.at("hidden").get<std::vector<std::size_t>>();
      }
    }
    if (j.contains("learn_anchor")) c.init.learn_anchor = j.at("learn_anchor").get<bool>();
    if (j.contains("init_seed")) c.init.seed = j.at("init_seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("toy config: ") + e.what());
  }
  return c;
}

}  // namespace lsblt
