// SPDX-License-Identifier: Apache-2.0
#pragma once

// Feed-forward core: dense layers, ReLU, inverted dropout, MSE / BCE-with-logits
// losses, and Adam with per-layer learning-rate multipliers.
//
// Batches are Eigen matrices with one sample per row.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "asd/bytes.hpp"
#include "asd/error.hpp"
#include "asd/rng.hpp"
#include "asd/types.hpp"

namespace asd {

struct DenseLayer {
  MatrixXd weights;  // [out x in]
  VectorXd bias;     // [out]
  double lr_multiplier = 1.0;  // 0 freezes the layer

  Eigen::Index in_dim() const noexcept { return weights.cols(); }
  Eigen::Index out_dim() const noexcept { return weights.rows(); }
  Eigen::Index parameter_count() const noexcept { return weights.size() + bias.size(); }
};

/// Weights and bias drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline DenseLayer make_dense(Eigen::Index in_dim, Eigen::Index out_dim, Rng& rng) {
  if (in_dim < 1 || out_dim < 1) fail(ErrorCode::config, "dense layer dimensions must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  DenseLayer layer;
  layer.weights.resize(out_dim, in_dim);
  layer.bias.resize(out_dim);
  for (Eigen::Index r = 0; r < out_dim; ++r)
    for (Eigen::Index c = 0; c < in_dim; ++c) layer.weights(r, c) = rng.uniform(-bound, bound);
  for (Eigen::Index r = 0; r < out_dim; ++r) layer.bias(r) = rng.uniform(-bound, bound);
  return layer;
}

struct DenseGrad {
  MatrixXd weights;
  VectorXd bias;
};

struct DenseBackward {
  DenseGrad grad;
  MatrixXd input_grad;
};

inline MatrixXd dense_forward(const DenseLayer& layer, const MatrixXd& input) {
  if (input.cols() != layer.in_dim())
    fail(ErrorCode::shape, "dense_forward: input width " + std::to_string(input.cols()) + " != layer in-dim " +
                               std::to_string(layer.in_dim()));
  MatrixXd out = input * layer.weights.transpose();
  out.rowwise() += layer.bias.transpose();
  return out;
}

inline DenseBackward dense_backward(const DenseLayer& layer, const MatrixXd& input, const MatrixXd& output_grad) {
  if (output_grad.cols() != layer.out_dim() || output_grad.rows() != input.rows())
    fail(ErrorCode::shape, "dense_backward: gradient shape mismatch");
  DenseBackward b;
  b.grad.weights = output_grad.transpose() * input;
  b.grad.bias = output_grad.colwise().sum().transpose();
  b.input_grad = output_grad * layer.weights;
  return b;
}

inline MatrixXd relu_forward(const MatrixXd& x) { return x.cwiseMax(0.0); }

inline MatrixXd relu_backward(const MatrixXd& input, const MatrixXd& output_grad) {
  return (input.array() > 0.0).select(output_grad, 0.0);
}

struct DropoutResult {
  MatrixXd output;
  MatrixXd mask;  // 0 for dropped units, 1/(1-p) for survivors
};

/// Inverted dropout: survivors are scaled at training time, inference is a pass-through.
inline DropoutResult dropout_forward(const MatrixXd& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::config, "dropout probability must lie in [0, 1)");
  DropoutResult r;
  if (!training || p == 0.0) {
    r.output = x;
    r.mask = MatrixXd::Ones(x.rows(), x.cols());
    return r;
  }
  const double keep_scale = 1.0 / (1.0 - p);
  r.mask.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) r.mask(i, j) = rng.bernoulli(p) ? 0.0 : keep_scale;
  r.output = x.cwiseProduct(r.mask);
  return r;
}

inline MatrixXd dropout_backward(const MatrixXd& mask, const MatrixXd& output_grad) {
  return output_grad.cwiseProduct(mask);
}

// ---------------------------------------------------------------- losses

struct LossResult {
  double value = 0.0;
  MatrixXd grad;  // d value / d prediction
};

inline LossResult mse_loss(const MatrixXd& pred, const MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    fail(ErrorCode::shape, "mse_loss: prediction and target shapes differ");
  const auto n = static_cast<double>(pred.size());
  const MatrixXd diff = pred - target;
  return {diff.squaredNorm() / n, 2.0 * diff / n};
}

inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Mean of max(z,0) - z*y + log(1 + exp(-|z|)); gradient (sigmoid(z) - y) / N.
inline LossResult bce_with_logits_loss(const MatrixXd& logits, const MatrixXd& labels) {
  if (logits.rows() != labels.rows() || logits.cols() != labels.cols())
    fail(ErrorCode::shape, "bce_with_logits_loss: logits and labels shapes differ");
  const auto n = static_cast<double>(logits.size());
  LossResult r;
  r.grad.resize(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double z = logits(i, j);
      const double y = labels(i, j);
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      r.grad(i, j) = (stable_sigmoid(z) - y) / n;
    }
  }
  r.value = total / n;
  return r;
}

// ---------------------------------------------------------------- network

struct Relu {};
struct Dropout {
  double p = 0.0;
};

using Stage = std::variant<DenseLayer, Relu, Dropout>;

enum class Mode { inference, training };

class Network {
 public:
  std::vector<Stage> stages;

  struct Trace {
    std::vector<MatrixXd> inputs;  // input to each stage
    std::vector<MatrixXd> masks;   // dropout masks, indexed by stage (empty for others)
    MatrixXd output;
  };

  Eigen::Index input_dim() const {
    for (const auto& s : stages)
      if (auto* d = std::get_if<DenseLayer>(&s)) return d->in_dim();
    return 0;
  }

  Eigen::Index output_dim() const {
    for (auto it = stages.rbegin(); it != stages.rend(); ++it)
      if (auto* d = std::get_if<DenseLayer>(&*it)) return d->out_dim();
    return 0;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& s : stages)
      if (auto* d = std::get_if<DenseLayer>(&s)) n += d->parameter_count();
    return n;
  }

  std::vector<DenseLayer*> dense_layers() {
    std::vector<DenseLayer*> out;
    for (auto& s : stages)
      if (auto* d = std::get_if<DenseLayer>(&s)) out.push_back(d);
    return out;
  }

  std::vector<const DenseLayer*> dense_layers() const {
    std::vector<const DenseLayer*> out;
    for (const auto& s : stages)
      if (auto* d = std::get_if<DenseLayer>(&s)) out.push_back(d);
    return out;
  }

  /// Inference pass; dropout is the identity.
  MatrixXd predict(const MatrixXd& x) const {
    MatrixXd h = x;
    for (const auto& s : stages) {
      if (auto* d = std::get_if<DenseLayer>(&s))
        h = dense_forward(*d, h);
      else if (std::holds_alternative<Relu>(s))
        h = relu_forward(h);
    }
    return h;
  }

  Trace forward(const MatrixXd& x, Mode mode, Rng& rng) const {
    Trace t;
    t.inputs.reserve(stages.size());
    t.masks.resize(stages.size());
    MatrixXd h = x;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      t.inputs.push_back(h);
      const auto& s = stages[i];
      if (auto* d = std::get_if<DenseLayer>(&s)) {
        h = dense_forward(*d, h);
      } else if (std::holds_alternative<Relu>(s)) {
        h = relu_forward(h);
      } else {
        auto r = dropout_forward(h, std::get<Dropout>(s).p, mode == Mode::training, rng);
        h = std::move(r.output);
        t.masks[i] = std::move(r.mask);
      }
    }
    t.output = std::move(h);
    return t;
  }

  /// Gradients for every dense layer, in stage order.
  std::vector<DenseGrad> backward(const Trace& trace, const MatrixXd& output_grad) const {
    std::vector<DenseGrad> grads;
    MatrixXd g = output_grad;
    for (std::size_t i = stages.size(); i-- > 0;) {
      const auto& s = stages[i];
      if (auto* d = std::get_if<DenseLayer>(&s)) {
        auto b = dense_backward(*d, trace.inputs[i], g);
        grads.push_back(std::move(b.grad));
        g = std::move(b.input_grad);
      } else if (std::holds_alternative<Relu>(s)) {
        g = relu_backward(trace.inputs[i], g);
      } else {
        g = dropout_backward(trace.masks[i], g);
      }
    }
    std::reverse(grads.begin(), grads.end());
    return grads;
  }
};

// ---------------------------------------------------------------- Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct ParamMoments {
  MatrixXd m_weights, v_weights;
  VectorXd m_bias, v_bias;
};

struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<ParamMoments> moments;  // one per dense layer
};

inline OptimizerState make_optimizer(const Network& net, AdamConfig config = {}) {
  OptimizerState state;
  state.config = config;
  for (const auto* d : net.dense_layers()) {
    ParamMoments m;
    m.m_weights = m.v_weights = MatrixXd::Zero(d->out_dim(), d->in_dim());
    m.m_bias = m.v_bias = VectorXd::Zero(d->out_dim());
    state.moments.push_back(std::move(m));
  }
  return state;
}

/// One bias-corrected Adam update of `params` in place; `step` is the 1-based step count.
template <typename Params, typename Grads>
void adam_update(Params& params, const Grads& grads, Params& m, Params& v, std::uint64_t step,
                 double learning_rate, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size())
    fail(ErrorCode::shape, "adam_update: parameter, gradient and moment shapes differ");
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grads;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  params.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

/// Applies one Adam step to every dense layer with effective rate base_lr * lr_multiplier.
/// Layers with multiplier 0 are skipped entirely (parameters and moments untouched).
inline void adam_step(Network& net, const std::vector<DenseGrad>& grads, OptimizerState& state) {
  auto layers = net.dense_layers();
  if (grads.size() != layers.size() || state.moments.size() != layers.size())
    fail(ErrorCode::shape, "adam_step: gradient/optimizer layer count mismatch");
  ++state.step;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    DenseLayer& layer = *layers[i];
    if (layer.lr_multiplier == 0.0) continue;
    const double lr = state.config.learning_rate * layer.lr_multiplier;
    auto& mom = state.moments[i];
    adam_update(layer.weights, grads[i].weights, mom.m_weights, mom.v_weights, state.step, lr, state.config);
    adam_update(layer.bias, grads[i].bias, mom.m_bias, mom.v_bias, state.step, lr, state.config);
  }
}

// ---------------------------------------------------------------- persistence

/// Model container: magic, version byte, kind string, stages, named float64 vectors.
struct ModelFile {
  std::string kind;
  Network network;
  std::map<std::string, VectorXd> vectors;
  std::map<std::string, std::string> tags;
};

inline constexpr std::string_view kModelMagic = "ASDMODEL";
inline constexpr std::uint8_t kModelVersion = 1;

inline std::string encode_model(const ModelFile& model) {
  ByteWriter w;
  w.put_bytes(kModelMagic);
  w.put<std::uint8_t>(kModelVersion);
  w.put_string(model.kind);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.network.stages.size()));
  for (const auto& s : model.network.stages) {
    if (auto* d = std::get_if<DenseLayer>(&s)) {
      w.put<std::uint8_t>(0);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(d->out_dim()));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(d->in_dim()));
      w.put<double>(d->lr_multiplier);
      const RowMatrixD rm = d->weights;
      w.put_span(std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
      w.put_span(std::span<const double>(d->bias.data(), static_cast<std::size_t>(d->bias.size())));
    } else if (std::holds_alternative<Relu>(s)) {
      w.put<std::uint8_t>(1);
    } else {
      w.put<std::uint8_t>(2);
      w.put<double>(std::get<Dropout>(s).p);
    }
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.vectors.size()));
  for (const auto& [name, vec] : model.vectors) {
    w.put_string(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(vec.size()));
    w.put_span(std::span<const double>(vec.data(), static_cast<std::size_t>(vec.size())));
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.tags.size()));
  for (const auto& [k, v] : model.tags) {
    w.put_string(k);
    w.put_string(v);
  }
  return std::move(w).bytes();
}

inline ModelFile decode_model(std::string_view bytes) {
  ByteReader r(bytes, "model");
  r.expect_magic(kModelMagic);
  const auto version = r.get<std::uint8_t>();
  if (version != kModelVersion) fail(ErrorCode::format, "model: unsupported version " + std::to_string(version));
  ModelFile model;
  model.kind = r.get_string();
  const auto n_stages = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_stages; ++i) {
    const auto tag = r.get<std::uint8_t>();
    if (tag == 0) {
      DenseLayer d;
      const auto out = r.get<std::uint32_t>();
      const auto in = r.get<std::uint32_t>();
      d.lr_multiplier = r.get<double>();
      RowMatrixD rm(out, in);
      r.get_span(std::span<double>(rm.data(), static_cast<std::size_t>(rm.size())));
      d.weights = rm;
      d.bias.resize(out);
      r.get_span(std::span<double>(d.bias.data(), out));
      model.network.stages.emplace_back(std::move(d));
    } else if (tag == 1) {
      model.network.stages.emplace_back(Relu{});
    } else if (tag == 2) {
      model.network.stages.emplace_back(Dropout{r.get<double>()});
    } else {
      fail(ErrorCode::format, "model: unknown stage tag " + std::to_string(tag));
    }
  }
  const auto n_vectors = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_vectors; ++i) {
    auto name = r.get_string();
    const auto len = r.get<std::uint32_t>();
    VectorXd v(len);
    r.get_span(std::span<double>(v.data(), len));
    model.vectors.emplace(std::move(name), std::move(v));
  }
  const auto n_tags = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tags; ++i) {
    auto k = r.get_string();
    model.tags.emplace(std::move(k), r.get_string());
  }
  if (r.remaining() != 0) fail(ErrorCode::format, "model: trailing bytes");
  return model;
}

}  // namespace asd
