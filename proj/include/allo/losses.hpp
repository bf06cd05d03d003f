// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Preference objectives over per-token policy/reference log-ratios.
//
//   dpo        -log sig(b * (sum chosen - sum rejected))
//   dpo_token  -log sig(b * (sum chosen - sum_j q_j * rejected_j))
//   npo        -log sig(-b * sum rejected)
//   npo_token  sum_j -log sig(-b * r_j * rejected_j)
//
// The *_objective functions take ratio tensors and are what the training
// loops call (with cached reference log-probabilities); the model-level
// functions compute the ratios themselves.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "allo/dataset.hpp"
#include "allo/model.hpp"

namespace allo::loss {

using TokenWeights = std::vector<std::uint8_t>;

struct LossConfig {
  double beta = 0.1;
  bool average_over_batch = true;
  /// npo_token: leave r = 0 tokens out of the sum instead of adding ln 2 each.
  bool drop_masked_tokens = false;

  /// Throws ContractError unless beta > 0.
  void validate() const;
};

/// policy_logprobs - reference_logprobs, differentiable in the first argument.
Tensor log_ratios(const Tensor& policy_logprobs, std::span<const double> reference_logprobs);

Tensor dpo_objective(const Tensor& chosen_ratios, const Tensor& rejected_ratios, std::span<const std::uint8_t> q,
                     double beta);
Tensor npo_objective(const Tensor& rejected_ratios, double beta);
Tensor npo_token_objective(const Tensor& rejected_ratios, std::span<const std::uint8_t> r, double beta,
                           bool drop_masked_tokens);

/// Policy-differentiable log-ratios; the reference is evaluated without
/// recording. Throws ContractError when the configs differ.
Tensor token_log_ratios_tensor(const lm::Model& policy, const lm::Model& reference, const lm::Tokens& prompt,
                               const lm::Tokens& response);
std::vector<double> token_log_ratios(const lm::Model& policy, const lm::Model& reference, const lm::Tokens& prompt,
                                     const lm::Tokens& response);

Tensor dpo_loss(const lm::Model& policy, const lm::Model& reference, const data::PreferenceTriple& triple,
                const LossConfig& cfg);
Tensor npo_loss(const lm::Model& policy, const lm::Model& reference, const data::PreferenceTriple& triple,
                const LossConfig& cfg);
Tensor npo_token_loss(const lm::Model& policy, const lm::Model& reference, const data::PreferenceTriple& triple,
                      const TokenWeights& r, const LossConfig& cfg);
Tensor dpo_token_loss(const lm::Model& policy, const lm::Model& reference, const data::PreferenceTriple& triple,
                      const TokenWeights& q, const LossConfig& cfg);

/// Mean next-token negative log-likelihood over the response tokens; prompt
/// positions carry no loss.
Tensor sft_loss(const lm::Model& model, const lm::Tokens& prompt, const lm::Tokens& response);

}  // namespace allo::loss
