// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/losses.hpp"

#include <fmt/format.h>

#include "allo/error.hpp"
#include "allo/ops.hpp"

namespace allo::loss {
namespace {

Tensor weight_tensor(std::span<const std::uint8_t> w) {
  std::vector<double> v(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 1) throw ContractError(fmt::format("token weight {} at position {} is not 0 or 1", int{w[i]}, i));
    v[i] = w[i];
  }
  return Tensor::vector(std::move(v));
}

void check_weights(std::span<const std::uint8_t> w, const Tensor& ratios, const char* what) {
  if (w.size() != ratios.size()) {
    throw ContractError(fmt::format("{} has {} entries for a rejected response of length {}", what, w.size(),
                                    ratios.size()));
  }
}

void check_nonempty(const data::PreferenceTriple& t, bool need_chosen) {
  if (need_chosen && t.chosen.empty()) throw ContractError("empty chosen response");
  if (t.rejected.empty()) throw ContractError("empty rejected response");
}

}  // namespace

void LossConfig::validate() const {
  if (!(beta > 0.0)) throw ContractError(fmt::format("beta must be positive, got {}", beta));
}

Tensor log_ratios(const Tensor& policy_logprobs, std::span<const double> reference_logprobs) {
  return ops::sub(policy_logprobs, Tensor::vector({reference_logprobs.begin(), reference_logprobs.end()}));
}

Tensor dpo_objective(const Tensor& chosen_ratios, const Tensor& rejected_ratios, std::span<const std::uint8_t> q,
                     double beta) {
  check_weights(q, rejected_ratios, "q");
  const Tensor margin = ops::sub(ops::sum(chosen_ratios), ops::sum(ops::mul(rejected_ratios, weight_tensor(q))));
  return ops::neg(ops::log_sigmoid(ops::scale(margin, beta)));
}

Tensor npo_objective(const Tensor& rejected_ratios, double beta) {
  return ops::neg(ops::log_sigmoid(ops::scale(ops::sum(rejected_ratios), -beta)));
}

Tensor npo_token_objective(const Tensor& rejected_ratios, std::span<const std::uint8_t> r, double beta,
                           bool drop_masked_tokens) {
  check_weights(r, rejected_ratios, "r");
  const Tensor w = weight_tensor(r);
  Tensor terms = ops::log_sigmoid(ops::scale(ops::mul(rejected_ratios, w), -beta));
  if (drop_masked_tokens) terms = ops::mul(terms, w);
  return ops::neg(ops::sum(terms));
}

Tensor token_log_ratios_tensor(const lm::Model& policy, const lm::Model& reference, const lm::Tokens& prompt,
                               const lm::Tokens& response) {
  if (!policy.config().same_architecture(reference.config())) {
    throw ContractError("policy and reference models have different architectures");
  }
  std::vector<double> ref;
  {
    NoGradScope no_grad;
    ref = lm::token_logprobs(reference, prompt, response);
  }
  return log_ratios(lm::token_logprobs_tensor(policy, prompt, response), ref);
}

std::vector<double> token_log_ratios(const lm::Model& policy, const lm::Model& reference, const lm::Tokens& prompt,
                                     const lm::Tokens& response) {
  NoGradScope no_grad;
  const Tensor t = token_log_ratios_tensor(policy, reference, prompt, response);
  return {t.data().begin(), t.data().end()};
}

Tensor dpo_loss(const lm::Model& policy, const lm::Model& reference, const data::PreferenceTriple& triple,
                const LossConfig& cfg) {
  return dpo_token_loss(policy, reference, triple, TokenWeights(triple.rejected.size(), 1), cfg);
}

Tensor npo_loss(const lm::Model& policy, const lm::Model& reference, const data::PreferenceTriple& triple,
                const LossConfig& cfg) {
  cfg.validate();
  check_nonempty(triple, false);
  return npo_objective(token_log_ratios_tensor(policy, reference, triple.prompt, triple.rejected), cfg.beta);
}

Tensor npo_token_loss(const lm::Model& policy, const lm::Model& reference, const data::PreferenceTriple& triple,
                      const TokenWeights& r, const LossConfig& cfg) {
  cfg.validate();
  check_nonempty(triple, false);
  if (r.size() != triple.rejected.size()) {
    throw ContractError(fmt::format("r has {} entries for a rejected response of length {}", r.size(),
                                    triple.rejected.size()));
  }
  return npo_token_objective(token_log_ratios_tensor(policy, reference, triple.prompt, triple.rejected), r,
                             cfg.beta, cfg.drop_masked_tokens);
}

Tensor dpo_token_loss(const lm::Model& policy, const lm::Model& reference, const data::PreferenceTriple& triple,
                      const TokenWeights& q, const LossConfig& cfg) {
  cfg.validate();
  check_nonempty(triple, true);
  if (q.size() != triple.rejected.size()) {
    throw ContractError(fmt::format("q has {} entries for a rejected response of length {}", q.size(),
                                    triple.rejected.size()));
  }
  const Tensor chosen = token_log_ratios_tensor(policy, reference, triple.prompt, triple.chosen);
  const Tensor rejected = token_log_ratios_tensor(policy, reference, triple.prompt, triple.rejected);
  return dpo_objective(chosen, rejected, q, cfg.beta);
}

Tensor sft_loss(const lm::Model& model, const lm::Tokens& prompt, const lm::Tokens& response) {
  if (response.empty()) throw ContractError("sft_loss needs a nonempty response");
  return ops::neg(ops::mean(lm::token_logprobs_tensor(model, prompt, response)));
}

}  // namespace allo::loss
