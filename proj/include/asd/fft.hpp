// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "asd/error.hpp"

namespace asd {

/// Iterative radix-2 FFT with precomputed twiddles and bit-reversal table.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0 || !std::has_single_bit(n)) fail(ErrorCode::config, "fft size must be a power of two");
    const unsigned bits = static_cast<unsigned>(std::countr_zero(n));
    reversed_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (unsigned b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      reversed_[i] = r;
    }
    twiddles_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k)
      twiddles_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  }

  std::size_t size() const noexcept { return n_; }

  /// Forward transform, X[k] = sum_t x[t] exp(-2 pi i k t / n).
  void forward(std::span<std::complex<double>> data) const {
    if (data.size() != n_) fail(ErrorCode::shape, "fft input length does not match plan");
    for (std::size_t i = 0; i < n_; ++i)
      if (i < reversed_[i]) std::swap(data[i], data[reversed_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          const auto w = twiddles_[j * stride];
          const auto u = data[start + j];
          const auto v = data[start + j + half] * w;
          data[start + j] = u + v;
          data[start + j + half] = u - v;
        }
      }
    }
  }

  /// Real-input transform returning the n/2+1 non-negative frequency bins.
  std::vector<std::complex<double>> forward_real(std::span<const double> input) const {
    std::vector<std::complex<double>> buffer(n_);
    for (std::size_t i = 0; i < n_ && i < input.size(); ++i) buffer[i] = input[i];
    forward(buffer);
    buffer.resize(n_ / 2 + 1);
    return buffer;
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> reversed_;
  std::vector<std::complex<double>> twiddles_;
};

}  // namespace asd
