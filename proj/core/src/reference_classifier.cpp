#include "lsblt/reference_classifier.hpp"

#include <cmath>

#include "lsblt/error.hpp"
#include "lsblt/random.hpp"

namespace lsblt {

ReferenceClassifier::ReferenceClassifier(std::size_t dim, std::size_t classes,
                                         const ReferenceConfig& config)
    : dim_(dim), classes_(classes), hidden_(config.hidden) {
  const std::size_t in = hidden_ > 0 ? hidden_ : dim_;
  if (hidden_ > 0) {
    Rng rng(config.seed);
    w1_ = Matrix(hidden_, dim_);
    const double sd = 1.0 / std::sqrt(static_cast<double>(dim_));
    for (auto& v : w1_.data) v = rng.normal(0.0, sd);
    b1_.assign(hidden_, 0.0);
  }
  w2_ = Matrix(classes_, in);
  b2_.assign(classes_, 0.0);
}

std::vector<double> ReferenceClassifier::logits(std::span<const double> x,
                                                std::vector<double>* hidden_out) const {
  std::vector<double> h;
  std::span<const double> in = x;
  if (hidden_ > 0) {
    h.resize(hidden_);
    for (std::size_t r = 0; r < hidden_; ++r) {
      double s = b1_[r];
      const auto w = w1_.row(r);
      for (std::size_t c = 0; c < dim_; ++c) s += w[c] * x[c];
      h[r] = std::tanh(s);
    }
    in = h;
  }
  std::vector<double> z(classes_);
  for (std::size_t r = 0; r < classes_; ++r) {
    double s = b2_[r];
    const auto w = w2_.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) s += w[c] * in[c];
    z[r] = s;
  }
  if (hidden_out) *hidden_out = std::move(h);
  return z;
}

std::vector<double> ReferenceClassifier::predict(std::span<const double> embedding) const {
  if (embedding.size() != dim_) {
    throw DataError("reference classifier: embedding length " + std::to_string(embedding.size()) +
                    " != " + std::to_string(dim_));
  }
  return softmax(logits(embedding, nullptr));
}

SampleSet ReferenceClassifier::rescore(const SampleSet& set) const {
  std::vector<SampleRecord> records(set.records());
  for (auto& r : records) r.probs = predict(r.embedding);
  Dims dims = set.dims();
  dims.num_classes = classes_;
  return SampleSet(dims, std::move(records));
}

ReferenceClassifier train_reference_classifier(const SampleSet& labeled,
                                               const ReferenceConfig& config) {
  if (labeled.empty()) throw DataError("train_reference_classifier: empty labeled set");
  const std::size_t dim = labeled.dims().embedding_dim;
  const std::size_t classes = labeled.dims().num_classes;
  std::vector<std::size_t> per_class(classes, 0);
  for (const auto& r : labeled) {
    if (!r.label) throw DataError("train_reference_classifier: record '" + r.id + "' is unlabeled");
    ++per_class[static_cast<std::size_t>(*r.label)];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (per_class[c] == 0) {
      throw DataError("train_reference_classifier: class " + std::to_string(c) + " missing");
    }
  }

  ReferenceClassifier model(dim, classes, config);
  const std::size_t hidden = model.hidden_;
  const std::size_t in = hidden > 0 ? hidden : dim;
  const double inv_n = 1.0 / static_cast<double>(labeled.size());

  Matrix gw1(model.w1_.rows, model.w1_.cols), vw1 = gw1;
  std::vector<double> gb1(model.b1_.size()), vb1 = gb1;
  Matrix gw2(classes, in), vw2 = gw2;
  std::vector<double> gb2(classes), vb2 = gb2;

  auto step_params = [&](auto& param, auto& grad, auto& vel) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      vel[i] = config.momentum * vel[i] - config.learning_rate * grad[i];
      param[i] += vel[i];
    }
  };

  std::vector<double> h;
  for (std::size_t step = 0; step <= config.steps; ++step) {
    std::fill(gw1.data.begin(), gw1.data.end(), 0.0);
    std::fill(gb1.begin(), gb1.end(), 0.0);
    std::fill(gw2.data.begin(), gw2.data.end(), 0.0);
    std::fill(gb2.begin(), gb2.end(), 0.0);
    double loss = 0.0;
    for (const auto& r : labeled) {
      const auto z = model.logits(r.embedding, &h);
      auto p = softmax(z);
      const auto y = static_cast<std::size_t>(*r.label);
      loss -= std::log(std::max(p[y], 1e-300)) * inv_n;
      p[y] -= 1.0;
      std::span<const double> x_in = hidden > 0 ? std::span<const double>(h) : r.embedding;
      std::vector<double> gh(hidden, 0.0);
      for (std::size_t c = 0; c < classes; ++c) {
        const double g = p[c] * inv_n;
        auto gw = gw2.row(c);
        const auto w = model.w2_.row(c);
        for (std::size_t k = 0; k < in; ++k) {
          gw[k] += g * x_in[k];
          if (hidden > 0) gh[k] += g * w[k];
        }
        gb2[c] += g;
      }
      for (std::size_t k = 0; k < hidden; ++k) {
        const double g = gh[k] * (1.0 - h[k] * h[k]);
        auto gw = gw1.row(k);
        for (std::size_t j = 0; j < dim; ++j) gw[j] += g * r.embedding[j];
        gb1[k] += g;
      }
    }
    double reg = 0.0;
    for (double w : model.w2_.data) reg += w * w;
    for (double w : model.w1_.data) reg += w * w;
    model.training_loss_ = loss + 0.5 * config.l2 * reg;
    if (step == config.steps) break;
    for (std::size_t i = 0; i < gw2.data.size(); ++i) gw2.data[i] += config.l2 * model.w2_.data[i];
    for (std::size_t i = 0; i < gw1.data.size(); ++i) gw1.data[i] += config.l2 * model.w1_.data[i];
    step_params(model.w2_.data, gw2.data, vw2.data);
    step_params(model.b2_, gb2, vb2);
    step_params(model.w1_.data, gw1.data, vw1.data);
    step_params(model.b1_, gb1, vb1);
  }
  return model;
}

}  // namespace lsblt
