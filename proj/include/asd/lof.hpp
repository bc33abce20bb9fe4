// SPDX-License-Identifier: Apache-2.0
#pragma once

// Local Outlier Factor in novelty mode, brute-force neighbour search.
//
// Neighbourhoods include every point tied at the k-distance, so a neighbour set may
// hold more than k members. Reachability-distance denominators are floored at 1e-12
// so duplicated points give large but finite densities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "asd/bytes.hpp"
#include "asd/error.hpp"
#include "asd/types.hpp"

namespace asd {

inline constexpr double kLofDenominatorFloor = 1e-12;

inline double minkowski(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b, double p) {
  if (p == 2.0) return (a - b).norm();
  if (p == 1.0) return (a - b).cwiseAbs().sum();
  return std::pow((a - b).cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

struct LofModel {
  MatrixXd points;  // [N x D] training points
  std::size_t k = 4;
  double p = 2.0;
  std::vector<double> k_distance;
  std::vector<double> lrd;
  std::vector<std::vector<std::size_t>> neighbors;

  Eigen::Index dim() const noexcept { return points.cols(); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(points.rows()); }
};

namespace detail {

struct Neighborhood {
  double k_distance = 0.0;
  std::vector<std::size_t> members;
};

// `dist[j]` is the distance to training point j; `skip` excludes one index (the point itself).
inline Neighborhood neighborhood(const std::vector<double>& dist, std::size_t k, std::size_t skip) {
  std::vector<double> sorted;
  sorted.reserve(dist.size());
  for (std::size_t j = 0; j < dist.size(); ++j)
    if (j != skip) sorted.push_back(dist[j]);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  Neighborhood n;
  n.k_distance = sorted[k - 1];
  for (std::size_t j = 0; j < dist.size(); ++j)
    if (j != skip && dist[j] <= n.k_distance) n.members.push_back(j);
  return n;
}

inline double local_reachability_density(const std::vector<double>& dist, const Neighborhood& n,
                                         const std::vector<double>& k_distance) {
  double sum = 0.0;
  for (auto b : n.members) sum += std::max(k_distance[b], dist[b]);
  return 1.0 / std::max(sum / static_cast<double>(n.members.size()), kLofDenominatorFloor);
}

inline std::vector<double> distances_to(const LofModel& m, const Eigen::Ref<const VectorXd>& q) {
  std::vector<double> d(m.size());
  for (std::size_t j = 0; j < m.size(); ++j) d[j] = minkowski(q, m.points.row(static_cast<Eigen::Index>(j)).transpose(), m.p);
  return d;
}

}  // namespace detail

inline LofModel fit_lof(const MatrixXd& train_points, std::size_t k = 4, double p = 2.0) {
  if (k < 1) fail(ErrorCode::config, "fit_lof: k must be >= 1");
  if (!(p >= 1.0) || !std::isfinite(p)) fail(ErrorCode::config, "fit_lof: Minkowski order p must be finite and >= 1");
  if (static_cast<std::size_t>(train_points.rows()) <= k)
    fail(ErrorCode::insufficient_data, "fit_lof: need more than k=" + std::to_string(k) + " training points, got " +
                                           std::to_string(train_points.rows()));
  if (!train_points.allFinite()) fail(ErrorCode::domain, "fit_lof: non-finite training points");

  LofModel m;
  m.points = train_points;
  m.k = k;
  m.p = p;
  const std::size_t n = m.size();
  std::vector<std::vector<double>> dist(n);
  m.k_distance.resize(n);
  m.neighbors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = detail::distances_to(m, m.points.row(static_cast<Eigen::Index>(i)).transpose());
    auto nb = detail::neighborhood(dist[i], k, i);
    m.k_distance[i] = nb.k_distance;
    m.neighbors[i] = std::move(nb.members);
  }
  m.lrd.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    m.lrd[i] = detail::local_reachability_density(dist[i], {m.k_distance[i], m.neighbors[i]}, m.k_distance);
  return m;
}

/// LOF of each training point relative to the rest of the training set.
inline std::vector<double> training_scores(const LofModel& m) {
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    double sum = 0.0;
    for (auto b : m.neighbors[i]) sum += m.lrd[b];
    out[i] = sum / static_cast<double>(m.neighbors[i].size()) / m.lrd[i];
  }
  return out;
}

/// Novelty-mode LOF: queries are never their own neighbours. Higher is more anomalous.
inline std::vector<double> score_lof(const LofModel& m, const MatrixXd& queries) {
  if (queries.cols() != m.dim())
    fail(ErrorCode::shape, "score_lof: query dim " + std::to_string(queries.cols()) + " != model dim " +
                               std::to_string(m.dim()));
  std::vector<double> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const auto dist = detail::distances_to(m, queries.row(q).transpose());
    const auto nb = detail::neighborhood(dist, m.k, static_cast<std::size_t>(-1));
    const double lrd_q = detail::local_reachability_density(dist, nb, m.k_distance);
    double sum = 0.0;
    for (auto b : nb.members) sum += m.lrd[b];
    out[static_cast<std::size_t>(q)] = sum / static_cast<double>(nb.members.size()) / lrd_q;
  }
  return out;
}

// ---------------------------------------------------------------- contamination vote

enum class VoteTie { anomalous, normal };

struct VoteConfig {
  std::vector<double> contamination{0.1, 0.2, 0.3, 0.4};
  VoteTie tie = VoteTie::anomalous;

  void validate() const {
    if (contamination.empty()) fail(ErrorCode::config, "vote: contamination list is empty");
    for (double c : contamination)
      if (!(c > 0.0 && c <= 0.5)) fail(ErrorCode::config, "vote: contamination levels must lie in (0, 0.5]");
  }
};

/// Linear-interpolation quantile (numpy's default), q in [0, 1].
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) fail(ErrorCode::insufficient_data, "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Thresholds at the (1 - c) quantile of the training scores, one per contamination level.
inline std::vector<double> vote_thresholds(const std::vector<double>& train_scores, const VoteConfig& votes) {
  votes.validate();
  if (train_scores.empty()) fail(ErrorCode::insufficient_data, "predict_vote: empty training scores");
  std::vector<double> t;
  for (double c : votes.contamination) t.push_back(quantile(train_scores, 1.0 - c));
  return t;
}

/// Majority vote over contamination levels; true = anomalous.
inline std::vector<bool> predict_vote(const std::vector<double>& train_scores, const std::vector<double>& query_scores,
                                      const VoteConfig& votes = {}) {
  const auto thresholds = vote_thresholds(train_scores, votes);
  std::vector<bool> out;
  out.reserve(query_scores.size());
  for (double s : query_scores) {
    std::size_t flags = 0;
    for (double t : thresholds) flags += s > t;
    const std::size_t twice = 2 * flags;
    const bool anomalous =
        twice > thresholds.size() || (twice == thresholds.size() && votes.tie == VoteTie::anomalous);
    out.push_back(anomalous);
  }
  return out;
}

// ---------------------------------------------------------------- persistence

inline constexpr std::string_view kLofMagic = "ASDLOF01";

/// Stores training points and parameters; neighbourhoods are recomputed on load.
inline std::string encode_lof(const LofModel& m) {
  ByteWriter w;
  w.put_bytes(kLofMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.k));
  w.put<double>(m.p);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.points.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.points.cols()));
  const RowMatrixD rm = m.points;
  w.put_span(std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
  return std::move(w).bytes();
}

inline LofModel decode_lof(std::string_view bytes) {
  ByteReader r(bytes, "lof model");
  r.expect_magic(kLofMagic);
  const auto k = r.get<std::uint32_t>();
  const auto p = r.get<double>();
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  RowMatrixD rm(rows, cols);
  r.get_span(std::span<double>(rm.data(), static_cast<std::size_t>(rm.size())));
  if (r.remaining() != 0) fail(ErrorCode::format, "lof model: trailing bytes");
  return fit_lof(rm, k, p);
}

}  // namespace asd
