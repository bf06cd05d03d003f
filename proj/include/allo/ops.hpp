// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Each op computes its output eagerly and, when
// any input requires a gradient and a tape is active, records its backward
// rule on that tape.

#pragma once

#include <cstdint>
#include <span>

#include "allo/tensor.hpp"

namespace allo::ops {

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Same-shape elementwise add, or [m,n] + [n] with the vector broadcast over rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor neg(const Tensor& a);

Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// log(sigmoid(x)) without overflow for large |x|.
Tensor log_sigmoid(const Tensor& a);
/// tanh-approximated GELU.
Tensor gelu(const Tensor& a);
/// Subgradient copysign(1, x): at x = +0 the backward rule reports 1.
Tensor abs(const Tensor& a);

/// Sum of all elements into a rank-0 tensor, accumulated in index order.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Softmax / log-softmax over the last axis of a rank-1 or rank-2 tensor.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

/// Row-wise layer normalization of [m,n] with per-column gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Rows of `table` ([v,d]) selected by `ids` -> [ids.size(), d].
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);

/// out[i] = a[i, cols[i]] for a of shape [m,n] -> [m].
Tensor gather(const Tensor& a, std::span<const std::int32_t> cols);

/// Rows [begin, end) of a rank-2 tensor.
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);

/// Adds `bias` [2d] to the query and value columns of `qkv` [t, 3d]. Keys get
/// no bias: a per-query constant on every logit does not change the softmax.
Tensor add_qv_bias(const Tensor& qkv, const Tensor& bias);

/// Multi-head causal self-attention over packed projections.
/// `qkv` is [t, 3d] laid out as [q | k | v]; output is [t, d].
Tensor causal_attention(const Tensor& qkv, std::size_t n_heads);

}  // namespace allo::ops
