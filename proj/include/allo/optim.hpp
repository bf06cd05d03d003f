// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "allo/tensor.hpp"

namespace allo {

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-element update mask: one byte per parameter element, 1 = trainable.
/// An empty mask means every element is trainable.
using ElementMask = std::vector<std::vector<std::uint8_t>>;

/// Optimizer state over a fixed list of parameter tensors. Adam moments are
/// only advanced on elements the mask selects, so frozen elements keep both
/// their value and their statistics.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::span<const Tensor> params);

  const OptimizerConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_count_; }

  /// One update. `grads[i]` and `mask[i]` must match `params[i]` in size.
  void masked_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
                   const ElementMask& mask);
  void step(std::span<Tensor> params, std::span<const std::vector<double>> grads) {
    masked_step(params, grads, {});
  }

  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  OptimizerConfig config_;
  std::int64_t step_count_ = 0;
  std::vector<std::size_t> sizes_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace allo
