// SPDX-License-Identifier: Apache-2.0
#pragma once

// Interpretability computations: per-head mean attention distance and exact t-SNE.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "asd/bytes.hpp"
#include "asd/error.hpp"
#include "asd/kv.hpp"
#include "asd/rng.hpp"
#include "asd/svg.hpp"
#include "asd/types.hpp"

namespace asd {

// ---------------------------------------------------------------- attention distance

struct AttentionTensor {
  std::vector<MatrixXd> heads;  // each [tokens x tokens], rows are attention distributions
  Eigen::Index grid_rows = 0;
  Eigen::Index grid_cols = 0;
  double pitch_vertical = 16.0;    // pixels between vertically adjacent patch centres
  double pitch_horizontal = 16.0;  // pixels between horizontally adjacent patch centres
  Eigen::Index n_special = 0;      // non-patch tokens at the front of the sequence

  Eigen::Index tokens() const { return heads.empty() ? 0 : heads.front().rows(); }
};

inline constexpr double kRowSumTolerance = 1e-6;

/// Mean over patch queries of the attention-weighted Euclidean distance (pixels) to every
/// patch key. Special tokens are dropped and each patch row renormalized over patch keys;
/// a row with no mass left on patches contributes distance 0.
inline std::vector<double> mean_attention_distance(const AttentionTensor& attn) {
  const Eigen::Index patches = attn.grid_rows * attn.grid_cols;
  if (attn.grid_rows < 1 || attn.grid_cols < 1) fail(ErrorCode::shape, "attention: grid must be at least 1x1");
  if (attn.n_special < 0) fail(ErrorCode::shape, "attention: negative special-token count");

  std::vector<double> cy(static_cast<std::size_t>(patches)), cx(static_cast<std::size_t>(patches));
  for (Eigen::Index p = 0; p < patches; ++p) {
    cy[static_cast<std::size_t>(p)] = static_cast<double>(p / attn.grid_cols) * attn.pitch_vertical;
    cx[static_cast<std::size_t>(p)] = static_cast<double>(p % attn.grid_cols) * attn.pitch_horizontal;
  }
  MatrixXd dist(patches, patches);
  for (Eigen::Index q = 0; q < patches; ++q)
    for (Eigen::Index k = 0; k < patches; ++k)
      dist(q, k) = std::hypot(cy[static_cast<std::size_t>(q)] - cy[static_cast<std::size_t>(k)],
                              cx[static_cast<std::size_t>(q)] - cx[static_cast<std::size_t>(k)]);

  std::vector<double> out;
  out.reserve(attn.heads.size());
  for (std::size_t h = 0; h < attn.heads.size(); ++h) {
    const MatrixXd& w = attn.heads[h];
    if (w.rows() != attn.n_special + patches || w.cols() != w.rows())
      fail(ErrorCode::shape, "attention head " + std::to_string(h) + " is " + std::to_string(w.rows()) + "x" +
                                 std::to_string(w.cols()) + ", expected " + std::to_string(attn.n_special + patches) +
                                 " tokens (n_special + grid)");
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const double s = w.row(r).sum();
      if (std::abs(s - 1.0) > kRowSumTolerance || (w.row(r).array() < 0.0).any())
        fail(ErrorCode::normalization, "attention head " + std::to_string(h) + " row " + std::to_string(r) +
                                           " is not a probability distribution (sum " + std::to_string(s) + ")");
    }
    const auto block = w.bottomRightCorner(patches, patches);
    double total = 0.0;
    for (Eigen::Index q = 0; q < patches; ++q) {
      const double mass = block.row(q).sum();
      if (mass <= 0.0) continue;
      total += block.row(q).dot(dist.row(q)) / mass;
    }
    out.push_back(total / static_cast<double>(patches));
  }
  return out;
}

/// Attention file: magic, u32 layers, u32 heads, u32 tokens, then row-major float32
/// [layers x heads x tokens x tokens]. Sidecar keys: grid_rows, grid_cols, pitch_vertical,
/// pitch_horizontal, n_special, and optional comma-separated layer_labels / head_labels.
struct AttentionFile {
  std::vector<AttentionTensor> layers;
  std::vector<std::string> layer_labels;
  std::vector<std::string> head_labels;
};

inline constexpr std::string_view kAttentionMagic = "ASDATTN1";

namespace detail {
inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}
inline std::string join_list(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}
}  // namespace detail

inline std::string encode_attention(const AttentionFile& f) {
  ByteWriter w;
  w.put_bytes(kAttentionMagic);
  const auto heads = f.layers.empty() ? 0u : static_cast<std::uint32_t>(f.layers.front().heads.size());
  const auto tokens = f.layers.empty() ? 0u : static_cast<std::uint32_t>(f.layers.front().tokens());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.layers.size()));
  w.put<std::uint32_t>(heads);
  w.put<std::uint32_t>(tokens);
  for (const auto& layer : f.layers) {
    if (layer.heads.size() != heads) fail(ErrorCode::shape, "attention file: layers have differing head counts");
    for (const auto& h : layer.heads) {
      if (h.rows() != tokens || h.cols() != tokens) fail(ErrorCode::shape, "attention file: ragged token counts");
      const RowMatrixF rm = h.cast<float>();
      w.put_span(std::span<const float>(rm.data(), static_cast<std::size_t>(rm.size())));
    }
  }
  return std::move(w).bytes();
}

inline Metadata attention_metadata(const AttentionFile& f) {
  Metadata m;
  const AttentionTensor proto = f.layers.empty() ? AttentionTensor{} : f.layers.front();
  m.set("kind", "attention");
  m.set("grid_rows", static_cast<std::int64_t>(proto.grid_rows));
  m.set("grid_cols", static_cast<std::int64_t>(proto.grid_cols));
  m.set("pitch_vertical", proto.pitch_vertical);
  m.set("pitch_horizontal", proto.pitch_horizontal);
  m.set("n_special", static_cast<std::int64_t>(proto.n_special));
  if (!f.layer_labels.empty()) m.set("layer_labels", detail::join_list(f.layer_labels));
  if (!f.head_labels.empty()) m.set("head_labels", detail::join_list(f.head_labels));
  return m;
}

inline AttentionFile decode_attention(std::string_view bytes, const Metadata& meta) {
  ByteReader r(bytes, "attention");
  r.expect_magic(kAttentionMagic);
  const auto layers = r.get<std::uint32_t>();
  const auto heads = r.get<std::uint32_t>();
  const auto tokens = r.get<std::uint32_t>();
  AttentionFile f;
  for (std::uint32_t l = 0; l < layers; ++l) {
    AttentionTensor t;
    t.grid_rows = meta.get_int("grid_rows");
    t.grid_cols = meta.get_int("grid_cols");
    t.pitch_vertical = meta.get_double("pitch_vertical");
    t.pitch_horizontal = meta.get_double("pitch_horizontal");
    t.n_special = meta.get_int("n_special");
    for (std::uint32_t h = 0; h < heads; ++h) {
      RowMatrixF rm(tokens, tokens);
      r.get_span(std::span<float>(rm.data(), static_cast<std::size_t>(rm.size())));
      t.heads.push_back(rm.cast<double>());
    }
    f.layers.push_back(std::move(t));
  }
  if (r.remaining() != 0) fail(ErrorCode::format, "attention: trailing bytes");
  if (meta.contains("layer_labels")) f.layer_labels = detail::split_list(meta.get("layer_labels"));
  if (meta.contains("head_labels")) f.head_labels = detail::split_list(meta.get("head_labels"));
  return f;
}

inline void write_attention(const std::filesystem::path& path, const AttentionFile& f) {
  write_file(path, encode_attention(f));
  write_file(path.string() + ".meta", attention_metadata(f).serialize());
}

inline AttentionFile read_attention(const std::filesystem::path& path) {
  return decode_attention(read_file(path), Metadata::parse(read_file(path.string() + ".meta")));
}

/// Distance-vs-layer scatter, one point per head.
inline std::string attention_distance_svg(const std::vector<std::vector<double>>& per_layer) {
  svg::Series s{"heads", {}, false, "#1f77b4"};
  for (std::size_t l = 0; l < per_layer.size(); ++l)
    for (double d : per_layer[l]) s.points.emplace_back(static_cast<double>(l + 1), d);
  return svg::render({s}, {.title = "Mean attention distance per head",
                           .x_label = "layer",
                           .y_label = "mean attention distance (px)",
                           .x_range = std::pair{0.0, static_cast<double>(per_layer.size() + 1)}});
}

// ---------------------------------------------------------------- t-SNE

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iteration = 250;
  std::uint64_t seed = 0;
  double entropy_tolerance = 1e-5;
  std::size_t kl_every = 50;

  void validate(Eigen::Index n) const {
    if (n < 4) fail(ErrorCode::config, "tsne: need at least 4 points");
    if (!(perplexity > 1.0 && perplexity < static_cast<double>(n)))
      fail(ErrorCode::config, "tsne: perplexity must satisfy 1 < perplexity < N (N=" + std::to_string(n) + ")");
    if (iterations < 1) fail(ErrorCode::config, "tsne: iterations must be >= 1");
    if (!(learning_rate > 0.0)) fail(ErrorCode::config, "tsne: learning rate must be positive");
  }
};

struct Affinities {
  MatrixXd joint;                  // symmetric P, sums to 1
  std::vector<double> beta;        // per-point precision 1 / (2 sigma^2)
  std::vector<double> entropy_error;  // |H(P_i) - log(perplexity)| at the chosen beta
};

inline MatrixXd squared_distances(const MatrixXd& x) {
  const VectorXd sq = x.rowwise().squaredNorm();
  MatrixXd d = (-2.0 * x * x.transpose()).colwise() + sq;
  d.rowwise() += sq.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

/// Conditional Gaussian affinities with per-point bandwidth found by bisection on the
/// entropy (natural log), then symmetrized: P = (P_cond + P_cond^T) / 2N.
inline Affinities compute_affinities(const MatrixXd& x, double perplexity, double tolerance = 1e-5,
                                     std::size_t max_steps = 200) {
  const Eigen::Index n = x.rows();
  const MatrixXd d = squared_distances(x);
  const double target = std::log(perplexity);
  MatrixXd cond = MatrixXd::Zero(n, n);
  Affinities a;
  a.beta.resize(static_cast<std::size_t>(n));
  a.entropy_error.resize(static_cast<std::size_t>(n));

  std::vector<double> row(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d(i, j));

    auto entropy_at = [&](double beta) {
      double z = 0.0, wsum = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) {
          row[static_cast<std::size_t>(j)] = 0.0;
          continue;
        }
        const double shifted = d(i, j) - dmin;
        const double v = std::exp(-beta * shifted);
        row[static_cast<std::size_t>(j)] = v;
        z += v;
        wsum += v * shifted;
      }
      return std::log(z) + beta * wsum / z;
    };

    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double h = entropy_at(beta);
    for (std::size_t step = 0; step < max_steps && std::abs(h - target) >= tolerance; ++step) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
      h = entropy_at(beta);
    }
    const double z = std::accumulate(row.begin(), row.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) cond(i, j) = row[static_cast<std::size_t>(j)] / z;
    a.beta[static_cast<std::size_t>(i)] = beta;
    a.entropy_error[static_cast<std::size_t>(i)] = std::abs(h - target);
  }
  a.joint = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  return a;
}

struct TsneResult {
  MatrixXd embedding;  // [N x 2]
  std::vector<std::pair<std::size_t, double>> kl_trace;  // (iteration, KL(P || Q)) with unexaggerated P
  double kl_after_exaggeration = std::numeric_limits<double>::quiet_NaN();
  double kl_final = std::numeric_limits<double>::quiet_NaN();
  Affinities affinities;
};

namespace detail {

inline MatrixXd student_t_kernel(const MatrixXd& y) {
  MatrixXd num = (1.0 + squared_distances(y).array()).inverse().matrix();
  num.diagonal().setZero();
  return num;
}

inline double kl_divergence(const MatrixXd& p, const MatrixXd& num) {
  const double z = num.sum();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pij = p(i, j);
      if (i == j || pij <= 0.0) continue;
      kl += pij * std::log(pij / std::max(num(i, j) / z, std::numeric_limits<double>::min()));
    }
  return kl;
}

}  // namespace detail

/// Exact O(N^2) t-SNE into two dimensions: gradient descent with momentum, per-coordinate
/// gains, early exaggeration, and re-centring after every step.
inline TsneResult tsne(const MatrixXd& points, const TsneConfig& cfg = {}) {
  cfg.validate(points.rows());
  if (!points.allFinite()) fail(ErrorCode::domain, "tsne: non-finite input");
  const Eigen::Index n = points.rows();

  TsneResult r;
  r.affinities = compute_affinities(points, cfg.perplexity, cfg.entropy_tolerance);
  const MatrixXd& p = r.affinities.joint;

  Rng rng(cfg.seed);
  MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < 2; ++c) y(i, c) = rng.normal(0.0, 1e-4);
  MatrixXd update = MatrixXd::Zero(n, 2);
  MatrixXd gains = MatrixXd::Ones(n, 2);

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    if (iter == cfg.exaggeration_iterations) r.kl_after_exaggeration = detail::kl_divergence(p, detail::student_t_kernel(y));
    const double exaggeration = iter < cfg.exaggeration_iterations ? cfg.early_exaggeration : 1.0;
    const double momentum = iter < cfg.momentum_switch_iteration ? cfg.initial_momentum : cfg.final_momentum;

    const MatrixXd num = detail::student_t_kernel(y);
    const double z = num.sum();
    // Gradient: 4 * sum_j (exag * p_ij - q_ij) * num_ij * (y_i - y_j)
    const MatrixXd w = ((exaggeration * p).array() - num.array() / z).matrix().cwiseProduct(num);
    const MatrixXd grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);

    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0.0) == (update(i, c) > 0.0);
        gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
        update(i, c) = momentum * update(i, c) - cfg.learning_rate * gains(i, c) * grad(i, c);
      }
    y += update;
    y.rowwise() -= y.colwise().mean();

    if (cfg.kl_every > 0 && (iter + 1) % cfg.kl_every == 0)
      r.kl_trace.emplace_back(iter + 1, detail::kl_divergence(p, detail::student_t_kernel(y)));
  }
  r.kl_final = detail::kl_divergence(p, detail::student_t_kernel(y));
  if (r.kl_trace.empty() || r.kl_trace.back().first != cfg.iterations) r.kl_trace.emplace_back(cfg.iterations, r.kl_final);
  r.embedding = std::move(y);
  return r;
}

/// 2-D scatter coloured by group label.
inline std::string tsne_svg(const MatrixXd& coords, const std::vector<std::string>& groups, const std::string& title) {
  std::vector<svg::Series> series;
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const auto& g = groups[static_cast<std::size_t>(i)];
    auto it = std::find(names.begin(), names.end(), g);
    std::size_t idx = static_cast<std::size_t>(it - names.begin());
    if (it == names.end()) {
      names.push_back(g);
      series.push_back({g, {}, false, {}});
    }
    series[idx].points.emplace_back(coords(i, 0), coords(i, 1));
  }
  return svg::render(series, {.title = title, .x_label = "t-SNE 1", .y_label = "t-SNE 2"});
}

}  // namespace asd
