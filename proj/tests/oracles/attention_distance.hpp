// SPDX-License-Identifier: Apache-2.0
#pragma once

// Mean attention distance by explicit enumeration of (query, key) patch pairs on
// the pixel grid, with special tokens stripped and rows renormalized.

#include <cmath>
#include <vector>

namespace asd::oracle {

/// `attn[q][k]` over all tokens; the first `n_special` tokens are not patches.
inline double mean_attention_distance(const std::vector<std::vector<double>>& attn, int grid_rows, int grid_cols,
                                      double pitch_v, double pitch_h, int n_special) {
  const int patches = grid_rows * grid_cols;
  double total = 0.0;
  for (int q = 0; q < patches; ++q) {
    const auto& row = attn[static_cast<std::size_t>(q + n_special)];
    double mass = 0.0, weighted = 0.0;
    for (int k = 0; k < patches; ++k) {
      const double a = row[static_cast<std::size_t>(k + n_special)];
      const double dy = (q / grid_cols - k / grid_cols) * pitch_v;
      const double dx = (q % grid_cols - k % grid_cols) * pitch_h;
      mass += a;
      weighted += a * std::sqrt(dy * dy + dx * dx);
    }
    if (mass > 0.0) total += weighted / mass;
  }
  return total / patches;
}

}  // namespace asd::oracle
