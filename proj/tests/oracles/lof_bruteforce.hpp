// SPDX-License-Identifier: Apache-2.0
#pragma once

// Literal transcription of the Local Outlier Factor definition over a full
// (N + M) x N distance table. Shares no code with asd/lof.hpp.

#include <algorithm>
#include <cmath>
#include <vector>

namespace asd::oracle {

using Points = std::vector<std::vector<double>>;

inline double minkowski_distance(const std::vector<double>& a, const std::vector<double>& b, double p) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(std::abs(a[i] - b[i]), p);
  return std::pow(s, 1.0 / p);
}

/// Scores `queries` against `train` in novelty mode. Neighbourhood N_k(x) is every
/// training point (other than x itself, for training points) within k-distance(x).
inline std::vector<double> lof_scores(const Points& train, const Points& queries, std::size_t k, double p) {
  const std::size_t n = train.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i][j] = minkowski_distance(train[i], train[j], p);

  auto kdist_of = [&](const std::vector<double>& row, long self) {
    std::vector<double> others;
    for (std::size_t j = 0; j < row.size(); ++j)
      if (static_cast<long>(j) != self) others.push_back(row[j]);
    std::sort(others.begin(), others.end());
    return others[k - 1];
  };
  auto hood = [&](const std::vector<double>& row, long self, double kd) {
    std::vector<std::size_t> h;
    for (std::size_t j = 0; j < row.size(); ++j)
      if (static_cast<long>(j) != self && row[j] <= kd) h.push_back(j);
    return h;
  };

  std::vector<double> kdist(n);
  for (std::size_t i = 0; i < n; ++i) kdist[i] = kdist_of(d[i], static_cast<long>(i));

  auto lrd_of = [&](const std::vector<double>& row, const std::vector<std::size_t>& h) {
    double total = 0.0;
    for (auto o : h) total += std::max(kdist[o], row[o]);
    return 1.0 / std::max(total / static_cast<double>(h.size()), 1e-12);
  };

  std::vector<double> lrd(n);
  for (std::size_t i = 0; i < n; ++i) lrd[i] = lrd_of(d[i], hood(d[i], static_cast<long>(i), kdist[i]));

  std::vector<double> out;
  for (const auto& q : queries) {
    std::vector<double> row(n);
    for (std::size_t j = 0; j < n; ++j) row[j] = minkowski_distance(q, train[j], p);
    const auto h = hood(row, -1, kdist_of(row, -1));
    const double lrd_q = lrd_of(row, h);
    double ratio = 0.0;
    for (auto o : h) ratio += lrd[o] / lrd_q;
    out.push_back(ratio / static_cast<double>(h.size()));
  }
  return out;
}

}  // namespace asd::oracle
