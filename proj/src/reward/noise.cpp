// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "allo/error.hpp"
#include "allo/reward.hpp"

namespace allo::reward {

TokenWeights noisy_weights(std::span<const double> log_ratios, double v_percent) {
  if (!(v_percent >= 0.0 && v_percent < 100.0)) {
    throw ContractError(fmt::format("threshold v must be in [0, 100), got {}", v_percent));
  }
  const std::size_t n = log_ratios.size();
  const auto zeros = static_cast<std::size_t>(std::floor(v_percent * static_cast<double>(n) / 100.0));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return log_ratios[a] > log_ratios[b]; });
  TokenWeights q(n, 1);
  for (std::size_t k = 0; k < zeros; ++k) q[order[k]] = 0;
  return q;
}

TokenWeights identify_noisy(const lm::Model& policy, const lm::Model& reference, const lm::Tokens& prompt,
                            const lm::Tokens& rejected, double v_percent) {
  return noisy_weights(loss::token_log_ratios(policy, reference, prompt, rejected), v_percent);
}

}  // namespace allo::reward
