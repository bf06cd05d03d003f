// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/optim.hpp"

#include <cmath>
#include <fmt/format.h>

#include "allo/error.hpp"

namespace allo {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "sgd") return OptimizerKind::sgd;
  if (text == "adam") return OptimizerKind::adam;
  throw ConfigError(fmt::format("unknown optimizer '{}' (expected sgd or adam)", text));
}

Optimizer::Optimizer(OptimizerConfig config, std::span<const Tensor> params) : config_(config) {
  if (!(config_.learning_rate > 0.0)) {
    throw ContractError(fmt::format("optimizer: learning rate must be positive, got {}", config_.learning_rate));
  }
  for (const Tensor& p : params) sizes_.push_back(p.size());
  if (config_.kind == OptimizerKind::adam) {
    for (std::size_t n : sizes_) {
      m_.emplace_back(n, 0.0);
      v_.emplace_back(n, 0.0);
    }
  }
}

void Optimizer::masked_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
                            const ElementMask& mask) {
  if (params.size() != sizes_.size() || grads.size() != sizes_.size() ||
      (!mask.empty() && mask.size() != sizes_.size())) {
    throw ContractError(fmt::format("masked_step: layout mismatch ({} params, {} grads, {} mask tensors, {} expected)",
                                    params.size(), grads.size(), mask.size(), sizes_.size()));
  }
  for (std::size_t t = 0; t < sizes_.size(); ++t) {
    if (params[t].size() != sizes_[t] || grads[t].size() != sizes_[t] ||
        (!mask.empty() && mask[t].size() != sizes_[t])) {
      throw ContractError(fmt::format("masked_step: tensor {} size mismatch", t));
    }
  }
  ++step_count_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::sgd) {
    for (std::size_t t = 0; t < sizes_.size(); ++t) {
      auto p = params[t].mutable_data();
      const auto& g = grads[t];
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (!mask.empty() && !mask[t][i]) continue;
        p[i] = p[i] - lr * g[i];
      }
    }
    return;
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (std::size_t t = 0; t < sizes_.size(); ++t) {
    auto p = params[t].mutable_data();
    const auto& g = grads[t];
    auto& m = m_[t];
    auto& v = v_[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!mask.empty() && !mask[t][i]) continue;
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] = p[i] - lr * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace allo
