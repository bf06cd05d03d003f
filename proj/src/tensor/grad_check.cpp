// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fmt/format.h>

#include "allo/error.hpp"

namespace allo {

GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params, double h) {
  if (!(h > 0.0)) throw ContractError(fmt::format("grad_check: step must be positive, got {}", h));

  const double first = loss_fn().item();
  const double second = loss_fn().item();
  if (first != second && !(std::isnan(first) && std::isnan(second))) {
    throw OracleError(fmt::format("grad_check: loss is not deterministic ({} vs {})", first, second));
  }

  GradTape tape;
  Gradients grads;
  {
    GradTape::Scope scope(tape);
    Tensor loss = loss_fn();
    grads = backward(tape, loss);
  }

  GradCheckResult result;
  for (std::size_t t = 0; t < params.size(); ++t) {
    const std::vector<double> analytic = grads.of(params[t]);
    auto values = params[t].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss_fn().item();
      values[i] = saved - h;
      const double down = loss_fn().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
      const double err = std::abs(analytic[i] - numeric) / denom;
      ++result.elements_checked;
      if (err > result.max_relative_error || std::isnan(err)) {
        result.max_relative_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
        result.worst_tensor = t;
        result.worst_index = i;
        result.worst_analytic = analytic[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace allo
