// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/train.hpp"

#include <cmath>
#include <numeric>

#include "allo/error.hpp"
#include "allo/ops.hpp"
#include "allo/random.hpp"

namespace allo::lm {

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, bool shuffle,
                                                    std::uint64_t seed) {
  if (batch_size == 0) throw ContractError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    Rng rng(seed);
    rng.shuffle(order);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return batches;
}

Tensor batch_mean(const std::vector<Tensor>& losses) {
  if (losses.empty()) throw ContractError("batch_mean of an empty batch");
  Tensor total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = ops::add(total, losses[i]);
  return losses.size() == 1 ? total : ops::scale(total, 1.0 / static_cast<double>(losses.size()));
}

StepResult compute_gradients(const Model& model, const ElementMask& mask, const std::function<Tensor()>& loss_fn) {
  GradTape tape;
  Tensor loss;
  {
    GradTape::Scope scope(tape);
    loss = loss_fn();
  }
  StepResult result;
  result.loss = loss.item();
  result.grads = model.gradients(backward(tape, loss));

  double sq = 0.0;
  for (std::size_t t = 0; t < result.grads.size(); ++t) {
    const auto& g = result.grads[t];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (mask.empty() || mask[t][i]) sq += g[i] * g[i];
    }
  }
  result.grad_norm = std::sqrt(sq);
  return result;
}

StepResult optimizer_step(Model& model, Optimizer& optimizer, const ElementMask& mask,
                          const std::function<Tensor()>& loss_fn) {
  StepResult result = compute_gradients(model, mask, loss_fn);
  optimizer.masked_step(model.params(), result.grads, mask);
  return result;
}

}  // namespace allo::lm
