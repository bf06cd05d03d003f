// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>

#include "allo/tensor.hpp"

namespace allo {

struct GradCheckResult {
  /// max over checked elements of |analytic - fd| / max(|analytic|, |fd|, 1e-12)
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
};

/// Compares reverse-mode gradients of `loss_fn` against central finite
/// differences with step `h`, element by element over `params`.
///
/// `loss_fn` must rebuild the loss from the current parameter values on each
/// call. It is evaluated twice up front; differing results raise OracleError.
/// At non-differentiable points (e.g. abs at 0) the reported error is large:
/// the subgradient and the symmetric difference quotient disagree.
GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params, double h);

}  // namespace allo
