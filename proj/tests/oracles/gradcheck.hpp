// SPDX-License-Identifier: Apache-2.0
#pragma once

// Whole-network gradient check against central differences, shared by the
// unit tests and the acceptance binary.

#include <algorithm>

#include "asd/neural.hpp"
#include "oracles/finite_diff.hpp"

namespace asd::oracle {

enum class LossKind { mse, bce };

/// Up to three dense layers of at most 16 units, ReLU between them, optional dropout.
inline Network random_small_network(Rng& rng, Eigen::Index in_dim, Eigen::Index out_dim) {
  const auto n_layers = 1 + static_cast<int>(rng.below(3));
  Network net;
  Eigen::Index width = in_dim;
  for (int l = 0; l < n_layers; ++l) {
    const bool last = l == n_layers - 1;
    const Eigen::Index next = last ? out_dim : 1 + static_cast<Eigen::Index>(rng.below(16));
    net.stages.emplace_back(make_dense(width, next, rng));
    if (!last) {
      net.stages.emplace_back(Relu{});
      if (rng.bernoulli(0.5)) net.stages.emplace_back(Dropout{0.25});
    }
    width = next;
  }
  return net;
}

/// Largest relative error between backprop and central differences over every parameter.
/// Dropout masks are frozen by re-seeding the generator on every evaluation.
inline double max_gradient_error(Network& net, const MatrixXd& x, const MatrixXd& target, LossKind kind,
                                 std::uint64_t mask_seed) {
  auto loss_of = [&](const MatrixXd& out) {
    return kind == LossKind::mse ? mse_loss(out, target) : bce_with_logits_loss(out, target);
  };
  Rng rng(mask_seed);
  const auto trace = net.forward(x, Mode::training, rng);
  const auto grads = net.backward(trace, loss_of(trace.output).grad);

  auto numeric_loss = [&] {
    Rng r(mask_seed);
    return loss_of(net.forward(x, Mode::training, r).output).value;
  };
  double worst = 0.0;
  auto layers = net.dense_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l]->weights;
    for (Eigen::Index i = 0; i < w.size(); ++i)
      worst = std::max(worst, relative_error(grads[l].weights.data()[i], central_difference(w.data()[i], numeric_loss)));
    auto& b = layers[l]->bias;
    for (Eigen::Index i = 0; i < b.size(); ++i)
      worst = std::max(worst, relative_error(grads[l].bias(i), central_difference(b(i), numeric_loss)));
  }
  return worst;
}

/// Draws a random network, batch and target, and returns the worst relative error.
inline double random_gradient_trial(Rng& rng, LossKind kind) {
  const auto in_dim = 1 + static_cast<Eigen::Index>(rng.below(8));
  const auto out_dim = kind == LossKind::bce ? Eigen::Index{1} : 1 + static_cast<Eigen::Index>(rng.below(6));
  const auto batch = 1 + static_cast<Eigen::Index>(rng.below(6));
  Network net = random_small_network(rng, in_dim, out_dim);
  MatrixXd x(batch, in_dim), y(batch, out_dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < y.size(); ++i)
    y.data()[i] = kind == LossKind::bce ? static_cast<double>(rng.bernoulli(0.5)) : rng.normal();
  return max_gradient_error(net, x, y, kind, rng.next());
}

}  // namespace asd::oracle
