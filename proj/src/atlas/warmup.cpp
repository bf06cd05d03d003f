// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>

#include "allo/atlas.hpp"
#include "allo/error.hpp"
#include "allo/losses.hpp"
#include "allo/train.hpp"

namespace allo::atlas {

std::string to_string(WarmupMethod method) {
  switch (method) {
    case WarmupMethod::dpo: return "dpo";
    case WarmupMethod::sft: return "sft";
    case WarmupMethod::npo: return "npo";
  }
  return "?";
}

WarmupMethod parse_warmup_method(const std::string& text) {
  for (WarmupMethod m : {WarmupMethod::dpo, WarmupMethod::sft, WarmupMethod::npo}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError(fmt::format("unknown warm-up method '{}' (expected dpo, sft or npo)", text));
}

WarmupResult train_reference(const lm::Model& base, const std::vector<data::PreferenceTriple>& triples,
                             const WarmupConfig& cfg, const WarmupObserver& observer) {
  if (triples.empty()) throw ContractError("warm-up needs a nonempty dataset");
  const double lr = cfg.optimizer.learning_rate;
  if (!(lr >= 0.0)) throw ContractError(fmt::format("warm-up learning rate must be >= 0, got {}", lr));
  if (cfg.method != WarmupMethod::sft) loss::LossConfig{cfg.beta}.validate();

  WarmupResult result{base.clone(), lr, cfg.method, {}};
  if (lr == 0.0) return result;

  // Reference log-probabilities under the frozen base.
  std::vector<std::vector<double>> ref_chosen(triples.size()), ref_rejected(triples.size());
  {
    NoGradScope no_grad;
    for (std::size_t i = 0; i < triples.size(); ++i) {
      triples[i].validate();
      if (cfg.method == WarmupMethod::dpo) ref_chosen[i] = lm::token_logprobs(base, triples[i].prompt, triples[i].chosen);
      if (cfg.method != WarmupMethod::sft) {
        ref_rejected[i] = lm::token_logprobs(base, triples[i].prompt, triples[i].rejected);
      }
    }
  }

  lm::Model& policy = result.reference;
  Optimizer optimizer(cfg.optimizer, policy.params());
  const auto batches = lm::epoch_batches(triples.size(), cfg.batch_size, cfg.shuffle, cfg.seed);
  for (std::size_t step = 0; step < batches.size(); ++step) {
    auto loss_fn = [&] {
      std::vector<Tensor> losses;
      for (std::size_t i : batches[step]) {
        const auto& t = triples[i];
        switch (cfg.method) {
          case WarmupMethod::dpo: {
            const Tensor c = loss::log_ratios(lm::token_logprobs_tensor(policy, t.prompt, t.chosen), ref_chosen[i]);
            const Tensor r =
                loss::log_ratios(lm::token_logprobs_tensor(policy, t.prompt, t.rejected), ref_rejected[i]);
            losses.push_back(loss::dpo_objective(c, r, loss::TokenWeights(t.rejected.size(), 1), cfg.beta));
            break;
          }
          case WarmupMethod::npo: {
            const Tensor r =
                loss::log_ratios(lm::token_logprobs_tensor(policy, t.prompt, t.rejected), ref_rejected[i]);
            losses.push_back(loss::npo_objective(r, cfg.beta));
            break;
          }
          case WarmupMethod::sft:
            losses.push_back(loss::sft_loss(policy, t.prompt, t.chosen));
            break;
        }
      }
      return lm::batch_mean(losses);
    };
    lm::StepResult s = lm::compute_gradients(policy, {}, loss_fn);
    if (observer) observer(step, policy, s.grads);
    optimizer.step(policy.params(), s.grads);
    result.losses.push_back(s.loss);
  }
  return result;
}

}  // namespace allo::atlas
