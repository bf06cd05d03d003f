// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared plumbing for every training loop: batch schedules, batch-mean
// losses and one masked optimizer step.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "allo/model.hpp"
#include "allo/optim.hpp"

namespace allo::lm {

/// Index batches for one epoch over `n` items. Order is a seeded shuffle
/// unless `shuffle` is false; the last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, bool shuffle,
                                                    std::uint64_t seed);

/// Mean of rank-0 losses, accumulated left to right.
Tensor batch_mean(const std::vector<Tensor>& losses);

struct StepResult {
  double loss = 0.0;
  /// L2 norm of the gradient restricted to trainable elements.
  double grad_norm = 0.0;
  ParamGrads grads;
};

/// Builds the loss on a fresh tape and runs backward. grad_norm counts only
/// elements selected by `mask` (all when empty).
StepResult compute_gradients(const Model& model, const ElementMask& mask, const std::function<Tensor()>& loss_fn);

/// compute_gradients followed by one masked optimizer update to `model`.
/// The returned loss is the pre-update value.
StepResult optimizer_step(Model& model, Optimizer& optimizer, const ElementMask& mask,
                          const std::function<Tensor()>& loss_fn);

}  // namespace allo::lm
