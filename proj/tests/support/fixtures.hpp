// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic fixtures shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <string>

#include "asd/embedding.hpp"
#include "asd/rng.hpp"

namespace asd::fixture {

/// Two isotropic unit Gaussians in `dim` dimensions whose centres are `separation`
/// standard deviations apart along the first axis. `anomalous_every` sets the class ratio.
inline EmbeddingSet two_gaussians(std::size_t n, Eigen::Index dim, double separation, std::uint64_t seed,
                                  std::size_t anomalous_every = 2) {
  Rng rng(seed);
  EmbeddingSet set;
  set.vectors.resize(static_cast<Eigen::Index>(n), dim);
  for (std::size_t i = 0; i < n; ++i) {
    const bool anomalous = i % anomalous_every == 0;
    for (Eigen::Index d = 0; d < dim; ++d) set.vectors(static_cast<Eigen::Index>(i), d) = rng.normal();
    if (anomalous) set.vectors(static_cast<Eigen::Index>(i), 0) += separation;
    set.clip_ids.push_back("clip_" + std::to_string(i));
    set.labels.push_back(anomalous ? Label::anomalous : Label::normal);
  }
  return set;
}

/// `clusters` Gaussian blobs of `per_cluster` points in `dim` dimensions with centres
/// drawn from N(0, spread^2) and unit within-cluster noise.
inline MatrixXd gaussian_clusters(std::size_t clusters, std::size_t per_cluster, Eigen::Index dim, double spread,
                                  std::uint64_t seed, std::vector<int>* labels = nullptr) {
  Rng rng(seed);
  MatrixXd centres(static_cast<Eigen::Index>(clusters), dim);
  for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = spread * rng.normal();
  MatrixXd x(static_cast<Eigen::Index>(clusters * per_cluster), dim);
  for (std::size_t c = 0; c < clusters; ++c)
    for (std::size_t j = 0; j < per_cluster; ++j) {
      const auto row = static_cast<Eigen::Index>(c * per_cluster + j);
      for (Eigen::Index d = 0; d < dim; ++d) x(row, d) = centres(static_cast<Eigen::Index>(c), d) + rng.normal();
      if (labels) labels->push_back(static_cast<int>(c));
    }
  return x;
}

struct LofInstance {
  MatrixXd train;
  MatrixXd queries;
};

/// Random LOF problem with N in [k+1, 50] training points and D in [1, 5]. With
/// `lattice` the coordinates are small integers, which produces k-distance ties.
inline LofInstance random_lof_instance(Rng& rng, std::size_t k, bool lattice = false) {
  const auto n = static_cast<Eigen::Index>(k + 1 + rng.below(50 - k));
  const auto d = 1 + static_cast<Eigen::Index>(rng.below(5));
  const auto m = 1 + static_cast<Eigen::Index>(rng.below(20));
  auto draw = [&] { return lattice ? static_cast<double>(rng.below(5)) : rng.normal() * rng.uniform(0.5, 3.0); };
  LofInstance inst{MatrixXd(n, d), MatrixXd(m, d)};
  for (Eigen::Index i = 0; i < inst.train.size(); ++i) inst.train.data()[i] = draw();
  for (Eigen::Index i = 0; i < inst.queries.size(); ++i) inst.queries.data()[i] = draw();
  return inst;
}

inline std::vector<std::vector<double>> to_rows(const MatrixXd& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)].push_back(m(r, c));
  return out;
}

/// Fraction of points whose nearest class centroid (computed in `coords`) is their own class.
inline double nearest_centroid_recovery(const MatrixXd& coords, const std::vector<int>& labels) {
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  MatrixXd centroids = MatrixXd::Zero(k, coords.cols());
  VectorXd counts = VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    centroids.row(labels[static_cast<std::size_t>(i)]) += coords.row(i);
    counts(labels[static_cast<std::size_t>(i)]) += 1.0;
  }
  for (int c = 0; c < k; ++c) centroids.row(c) /= counts(c);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    Eigen::Index best;
    (centroids.rowwise() - coords.row(i)).rowwise().squaredNorm().minCoeff(&best);
    hits += best == labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(coords.rows());
}

}  // namespace asd::fixture
