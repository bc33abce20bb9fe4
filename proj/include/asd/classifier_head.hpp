// SPDX-License-Identifier: Apache-2.0
#pragma once

// Supervised detection head over precomputed embeddings:
//   Linear(in, 256) -> Dropout(0.1) -> ReLU -> Linear(256, 1)
// trained with BCE-with-logits and Adam. Scores are sigmoid(logit).

#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "asd/embedding.hpp"
#include "asd/error.hpp"
#include "asd/neural.hpp"
#include "asd/rng.hpp"

namespace asd {

struct HeadConfig {
  std::size_t epochs = 1;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double dropout = 0.1;
  Eigen::Index hidden_dim = 256;
  bool standardize = false;
  double hidden_lr_multiplier = 1.0;  // first dense layer
  double output_lr_multiplier = 1.0;  // final dense layer
};

struct ClassifierHead {
  Network network;
  std::optional<Standardizer> standardizer;

  Eigen::Index input_dim() const { return network.input_dim(); }

  VectorXd logits(const MatrixXd& x) const {
    if (x.cols() != input_dim())
      fail(ErrorCode::shape, "head: embedding dim " + std::to_string(x.cols()) + " != head input dim " +
                                 std::to_string(input_dim()));
    return network.predict(standardizer ? standardizer->apply(x) : x).col(0);
  }
};

inline ClassifierHead build_head(Eigen::Index in_dim, Rng& rng, Eigen::Index hidden = 256, double dropout = 0.1) {
  if (in_dim < 1) fail(ErrorCode::config, "build_head: in_dim must be >= 1");
  ClassifierHead head;
  head.network.stages.emplace_back(make_dense(in_dim, hidden, rng));
  head.network.stages.emplace_back(Dropout{dropout});
  head.network.stages.emplace_back(Relu{});
  head.network.stages.emplace_back(make_dense(hidden, 1, rng));
  return head;
}

inline ClassifierHead build_head(Eigen::Index in_dim, const HeadConfig& cfg = {}) {
  Rng rng(cfg.seed);
  auto head = build_head(in_dim, rng, cfg.hidden_dim, cfg.dropout);
  auto layers = head.network.dense_layers();
  layers.front()->lr_multiplier = cfg.hidden_lr_multiplier;
  layers.back()->lr_multiplier = cfg.output_lr_multiplier;
  return head;
}

/// Trains a fresh head on the labeled rows of `set`; unlabeled rows are ignored.
inline ClassifierHead train_head(const EmbeddingSet& set, const HeadConfig& cfg = {}) {
  set.validate();
  std::vector<std::size_t> rows;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    if (set.labels[i] == Label::unlabeled) continue;
    rows.push_back(i);
    positives += set.labels[i] == Label::anomalous;
  }
  if (positives == 0 || positives == rows.size())
    fail(ErrorCode::degenerate_labels, "train_head: training set needs both normal and anomalous examples");
  if (cfg.batch_size == 0) fail(ErrorCode::config, "train_head: batch_size must be >= 1");

  ClassifierHead head = build_head(set.dim(), cfg);
  Rng rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
  if (cfg.standardize) {
    const auto labeled = set.select(rows);
    head.standardizer = Standardizer::fit(labeled.vectors);
  }
  if (cfg.epochs == 0) return head;

  const MatrixXd x = head.standardizer ? head.standardizer->apply(set.vectors) : set.vectors;
  auto optimizer = make_optimizer(head.network, {.learning_rate = cfg.learning_rate});
  MatrixXd batch, targets;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(rows));
    for (std::size_t start = 0; start < rows.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, rows.size() - start);
      batch.resize(static_cast<Eigen::Index>(n), x.cols());
      targets.resize(static_cast<Eigen::Index>(n), 1);
      for (std::size_t i = 0; i < n; ++i) {
        const auto r = rows[start + i];
        batch.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(r));
        targets(static_cast<Eigen::Index>(i), 0) = set.labels[r] == Label::anomalous ? 1.0 : 0.0;
      }
      const auto trace = head.network.forward(batch, Mode::training, rng);
      const auto loss = bce_with_logits_loss(trace.output, targets);
      adam_step(head.network, head.network.backward(trace, loss.grad), optimizer);
    }
  }
  return head;
}

/// Per-row anomaly probability sigmoid(logit), dropout disabled.
inline VectorXd score(const ClassifierHead& head, const MatrixXd& embeddings) {
  return head.logits(embeddings).unaryExpr([](double z) { return stable_sigmoid(z); });
}

inline VectorXd score(const ClassifierHead& head, const EmbeddingSet& set) { return score(head, set.vectors); }

inline ModelFile to_model_file(const ClassifierHead& head) {
  ModelFile f;
  f.kind = "classifier_head";
  f.network = head.network;
  if (head.standardizer) {
    f.vectors["feature_mean"] = head.standardizer->mean;
    f.vectors["feature_stddev"] = head.standardizer->stddev;
  }
  return f;
}

inline ClassifierHead head_from_model_file(const ModelFile& f) {
  if (f.kind != "classifier_head") fail(ErrorCode::format, "model file holds '" + f.kind + "', expected classifier_head");
  ClassifierHead h;
  h.network = f.network;
  if (f.vectors.count("feature_mean")) h.standardizer = Standardizer{f.vectors.at("feature_mean"), f.vectors.at("feature_stddev")};
  return h;
}

}  // namespace asd
