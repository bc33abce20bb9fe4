// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central-difference gradient oracle. Perturbs one scalar at a time through a
// caller-supplied accessor and evaluates the loss by forward computation only.

#include <cmath>
#include <functional>

namespace asd::oracle {

inline double central_difference(double& parameter, const std::function<double()>& loss, double step = 1e-5) {
  const double saved = parameter;
  parameter = saved + step;
  const double plus = loss();
  parameter = saved - step;
  const double minus = loss();
  parameter = saved;
  return (plus - minus) / (2.0 * step);
}

/// |a - b| / max(|a|, |b|), with both-tiny treated as agreement.
inline double relative_error(double analytic, double numeric, double tiny = 1e-7) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < tiny) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

}  // namespace asd::oracle
