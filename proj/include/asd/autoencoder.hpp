// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reconstruction autoencoder: in -> 64 -> 64 -> 8 -> 64 -> 64 -> in, ReLU between
// layers, linear output. Trained on normal windows only; a clip's anomaly score is
// the mean over its windows of the per-window reconstruction MSE in dB space.

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "asd/dsp.hpp"
#include "asd/error.hpp"
#include "asd/neural.hpp"
#include "asd/rng.hpp"

namespace asd {

struct AutoencoderConfig {
  std::size_t epochs = 50;
  double learning_rate = 1e-3;
  std::size_t batch_size = 512;
  std::uint64_t seed = 0;
  bool standardize = true;  // per-feature z-scoring with train-set statistics
  Eigen::Index hidden_dim = 64;
  Eigen::Index bottleneck_dim = 8;
};

struct AutoencoderModel {
  Network network;
  bool standardized = false;
  VectorXd feature_mean;    // empty unless standardized
  VectorXd feature_stddev;  // floored at 1e-8 -> 1

  Eigen::Index input_dim() const { return network.input_dim(); }

  MatrixXd to_model_space(const MatrixXd& x) const {
    if (!standardized) return x;
    return (x.rowwise() - feature_mean.transpose()).array().rowwise() / feature_stddev.transpose().array();
  }

  MatrixXd from_model_space(const MatrixXd& y) const {
    if (!standardized) return y;
    return (y.array().rowwise() * feature_stddev.transpose().array()).matrix().rowwise() + feature_mean.transpose();
  }

  /// Reconstruction in the input (dB) space.
  MatrixXd reconstruct(const MatrixXd& x) const { return from_model_space(network.predict(to_model_space(x))); }
};

struct AutoencoderTraining {
  AutoencoderModel model;
  std::vector<double> loss_history;  // mean training loss per epoch
};

inline Network build_autoencoder_network(Eigen::Index input_dim, Rng& rng, Eigen::Index hidden = 64,
                                         Eigen::Index bottleneck = 8) {
  Network net;
  const Eigen::Index dims[] = {input_dim, hidden, hidden, bottleneck, hidden, hidden, input_dim};
  for (std::size_t i = 0; i + 1 < std::size(dims); ++i) {
    net.stages.emplace_back(make_dense(dims[i], dims[i + 1], rng));
    if (i + 2 < std::size(dims)) net.stages.emplace_back(Relu{});
  }
  return net;
}

inline MatrixXd stack_windows(std::span<const WindowBatch> batches) {
  Eigen::Index rows = 0, width = -1;
  for (const auto& b : batches) {
    if (width >= 0 && b.width() != width) fail(ErrorCode::shape, "window batches have differing widths");
    width = b.width();
    rows += b.size();
  }
  MatrixXd out(rows, std::max<Eigen::Index>(width, 0));
  Eigen::Index r = 0;
  for (const auto& b : batches) {
    out.middleRows(r, b.size()) = b.data.cast<double>();
    r += b.size();
  }
  return out;
}

/// Trains on the rows of `windows` (each row one context window from a normal clip).
inline AutoencoderTraining train_autoencoder(const MatrixXd& windows, Eigen::Index input_dim,
                                             const AutoencoderConfig& cfg = {}) {
  if (windows.rows() == 0) fail(ErrorCode::insufficient_data, "train_autoencoder: empty training set");
  if (windows.cols() != input_dim)
    fail(ErrorCode::shape, "train_autoencoder: window width " + std::to_string(windows.cols()) +
                               " != model input dim " + std::to_string(input_dim));
  if (cfg.batch_size == 0) fail(ErrorCode::config, "train_autoencoder: batch_size must be >= 1");

  Rng rng(cfg.seed);
  AutoencoderTraining out;
  AutoencoderModel& model = out.model;
  model.network = build_autoencoder_network(input_dim, rng, cfg.hidden_dim, cfg.bottleneck_dim);
  model.standardized = cfg.standardize;
  if (cfg.standardize) {
    model.feature_mean = windows.colwise().mean().transpose();
    const MatrixXd centered = windows.rowwise() - model.feature_mean.transpose();
    model.feature_stddev =
        (centered.array().square().colwise().sum() / static_cast<double>(windows.rows())).sqrt().transpose();
    for (Eigen::Index i = 0; i < model.feature_stddev.size(); ++i)
      if (model.feature_stddev(i) < 1e-8) model.feature_stddev(i) = 1.0;
  }
  if (cfg.epochs == 0) return out;

  const MatrixXd data = model.to_model_space(windows);
  auto optimizer = make_optimizer(model.network, {.learning_rate = cfg.learning_rate});
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  MatrixXd batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    double weighted_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      batch.resize(static_cast<Eigen::Index>(n), data.cols());
      for (std::size_t i = 0; i < n; ++i) batch.row(static_cast<Eigen::Index>(i)) = data.row(order[start + i]);
      const auto trace = model.network.forward(batch, Mode::training, rng);
      const auto loss = mse_loss(trace.output, batch);
      adam_step(model.network, model.network.backward(trace, loss.grad), optimizer);
      weighted_loss += loss.value * static_cast<double>(n);
    }
    out.loss_history.push_back(weighted_loss / static_cast<double>(order.size()));
  }
  return out;
}

inline AutoencoderTraining train_autoencoder(std::span<const WindowBatch> normal_windows, Eigen::Index input_dim,
                                             const AutoencoderConfig& cfg = {}) {
  if (normal_windows.empty()) fail(ErrorCode::insufficient_data, "train_autoencoder: empty training set");
  return train_autoencoder(stack_windows(normal_windows), input_dim, cfg);
}

/// Per-window reconstruction MSE (mean over features), in input space.
inline VectorXd window_errors(const AutoencoderModel& model, const MatrixXd& windows) {
  if (windows.cols() != model.input_dim())
    fail(ErrorCode::shape, "score: window width " + std::to_string(windows.cols()) + " != model input dim " +
                               std::to_string(model.input_dim()));
  const MatrixXd recon = model.reconstruct(windows);
  return (recon - windows).array().square().rowwise().mean();
}

/// Clip anomaly score: mean over the clip's windows of per-window MSE. Higher is more anomalous.
inline double score_clip(const AutoencoderModel& model, const WindowBatch& clip_windows) {
  if (clip_windows.size() == 0) fail(ErrorCode::insufficient_data, "score_clip: empty window batch");
  return window_errors(model, clip_windows.data.cast<double>()).mean();
}

inline ModelFile to_model_file(const AutoencoderModel& model) {
  ModelFile f;
  f.kind = "autoencoder";
  f.network = model.network;
  f.tags["standardized"] = model.standardized ? "true" : "false";
  if (model.standardized) {
    f.vectors["feature_mean"] = model.feature_mean;
    f.vectors["feature_stddev"] = model.feature_stddev;
  }
  return f;
}

inline AutoencoderModel autoencoder_from_model_file(const ModelFile& f) {
  if (f.kind != "autoencoder") fail(ErrorCode::format, "model file holds '" + f.kind + "', expected autoencoder");
  AutoencoderModel m;
  m.network = f.network;
  auto it = f.tags.find("standardized");
  m.standardized = it != f.tags.end() && it->second == "true";
  if (m.standardized) {
    m.feature_mean = f.vectors.at("feature_mean");
    m.feature_stddev = f.vectors.at("feature_stddev");
  }
  return m;
}

}  // namespace asd
