// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>

#include "allo/error.hpp"
#include "allo/losses.hpp"
#include "allo/pipeline.hpp"
#include "allo/train.hpp"

namespace allo::pipeline {
namespace {

void check_mask(const lm::Model& model, const atlas::NeuronMask& mask) {
  if (mask.layout != model.layout() || mask.bits.size() != mask.layout.size()) {
    throw ContractError("neuron mask layout does not match the model");
  }
}

std::vector<double> reference_logprobs(const lm::Model& reference, const lm::Tokens& prompt,
                                       const lm::Tokens& response) {
  NoGradScope no_grad;
  return lm::token_logprobs(reference, prompt, response);
}

}  // namespace

std::string hex(std::uint64_t value) { return fmt::format("{:016x}", value); }

LocateResult run_locate(const lm::Model& base, const std::vector<data::PreferenceTriple>& train,
                        const Stage1Config& cfg, std::uint64_t seed, const MetricsSink& sink) {
  if (!(cfg.optimizer.learning_rate > 0.0)) {
    throw ContractError(fmt::format("stage1 learning rate must be positive, got {}", cfg.optimizer.learning_rate));
  }
  atlas::WarmupConfig warm{cfg.method, cfg.optimizer, cfg.batch, cfg.beta, true, seed};
  atlas::WarmupResult w = atlas::train_reference(base, train, warm);
  if (sink) {
    for (std::size_t i = 0; i < w.losses.size(); ++i) sink({i, "locate", w.losses[i], 0.0, 0.0, w.alpha});
  }
  LocateResult out;
  out.importance = atlas::estimate_importance(base, w.reference, w.alpha);
  out.importance.method = cfg.method;
  out.n1 = stage_mask(out.importance, StageMask::top, cfg.k1, cfg, seed);
  out.n2 = stage_mask(out.importance, StageMask::top, cfg.k2, cfg, seed);
  out.warmup_losses = std::move(w.losses);
  out.reference_hash = w.reference.hash();
  return out;
}

atlas::NeuronMask stage_mask(const atlas::ImportanceMap& importance, StageMask mode, double ratio_percent,
                             const Stage1Config& cfg, std::uint64_t seed) {
  if (mode == StageMask::none) return atlas::full_mask(importance.layout);
  atlas::MaskSpec spec;
  spec.ratio = ratio_percent / 100.0;
  spec.mode = mode == StageMask::top ? atlas::MaskMode::top
              : mode == StageMask::last ? atlas::MaskMode::last
                                        : atlas::MaskMode::random;
  spec.scope = cfg.scope;
  spec.seed = seed;
  spec.include_embeddings_and_norms = cfg.include_embeddings_and_norms;
  return atlas::build_mask(importance, spec);
}

std::vector<reward::TokenWeights> score_dataset(const reward::TokenScorer& scorer,
                                                const std::vector<data::PreferenceTriple>& triples, double u,
                                                const std::filesystem::path& cache_path) {
  const std::string hash = data::dataset_hash(triples);
  if (!cache_path.empty()) {
    if (auto cached = reward::read_r_cache(cache_path, hash)) return std::move(*cached);
  }
  std::vector<reward::TokenWeights> r;
  r.reserve(triples.size());
  for (const auto& t : triples) r.push_back(reward::score_unaligned(scorer, t, u));
  if (!cache_path.empty()) reward::write_r_cache(cache_path, hash, r);
  return r;
}

StageReport run_forget(lm::Model& model, const atlas::NeuronMask& mask,
                       const std::vector<data::PreferenceTriple>& train, const std::vector<reward::TokenWeights>& r,
                       const ForgetConfig& cfg, std::uint64_t seed, const MetricsSink& sink) {
  check_mask(model, mask);
  if (cfg.token_reward && r.size() != train.size()) {
    throw ContractError(fmt::format("{} reward vectors for {} triples", r.size(), train.size()));
  }
  loss::LossConfig{cfg.beta}.validate();

  const lm::Model reference = model.clone();
  StageReport report{0, model.hash(), reference.hash(), {}};

  std::vector<std::size_t> usable;
  std::vector<std::vector<double>> ref_rejected(train.size());
  std::vector<reward::TokenWeights> weights(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& t = train[i];
    t.validate();
    if (t.degenerate || t.chosen == t.rejected) continue;
    usable.push_back(i);
    ref_rejected[i] = reference_logprobs(reference, t.prompt, t.rejected);
    weights[i] = cfg.token_reward ? r[i] : reward::TokenWeights(t.rejected.size(), 1);
    if (weights[i].size() != t.rejected.size()) {
      throw ContractError(fmt::format("reward vector {} has length {}, rejected has {}", i, weights[i].size(),
                                      t.rejected.size()));
    }
  }
  if (usable.empty()) return report;

  Optimizer optimizer(cfg.optimizer, model.params());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : lm::epoch_batches(usable.size(), cfg.batch, true, seed + epoch)) {
      std::size_t tokens = 0, masked = 0;
      for (std::size_t b : batch) {
        const auto& w = weights[usable[b]];
        tokens += w.size();
        masked += static_cast<std::size_t>(std::count(w.begin(), w.end(), std::uint8_t{0}));
      }
      const lm::StepResult s = lm::optimizer_step(model, optimizer, mask.bits, [&] {
        std::vector<Tensor> losses;
        for (std::size_t b : batch) {
          const std::size_t i = usable[b];
          const Tensor ratios =
              loss::log_ratios(lm::token_logprobs_tensor(model, train[i].prompt, train[i].rejected), ref_rejected[i]);
          losses.push_back(loss::npo_token_objective(ratios, weights[i], cfg.beta, cfg.drop_masked_tokens));
        }
        return lm::batch_mean(losses);
      });
      report.losses.push_back(s.loss);
      if (sink) {
        sink({report.steps, "forget", s.loss, static_cast<double>(masked) / static_cast<double>(tokens), s.grad_norm,
              cfg.optimizer.learning_rate});
      }
      ++report.steps;
    }
  }
  return report;
}

StageReport run_learn(lm::Model& model, const atlas::NeuronMask& mask,
                      const std::vector<data::PreferenceTriple>& train, const LearnConfig& cfg, std::uint64_t seed,
                      const MetricsSink& sink, const WeightObserver& on_q) {
  check_mask(model, mask);
  if (train.empty()) throw ContractError("learning stage needs a nonempty dataset");
  loss::LossConfig{cfg.beta}.validate();
  const double v = cfg.token_reward ? cfg.v : 0.0;

  const lm::Model reference = model.clone();
  StageReport report{0, model.hash(), reference.hash(), {}};

  std::vector<std::vector<double>> ref_chosen(train.size()), ref_rejected(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    train[i].validate();
    ref_chosen[i] = reference_logprobs(reference, train[i].prompt, train[i].chosen);
    ref_rejected[i] = reference_logprobs(reference, train[i].prompt, train[i].rejected);
  }

  Optimizer optimizer(cfg.optimizer, model.params());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : lm::epoch_batches(train.size(), cfg.batch, true, seed + epoch)) {
      std::size_t tokens = 0, masked = 0;
      const lm::StepResult s = lm::optimizer_step(model, optimizer, mask.bits, [&] {
        std::vector<Tensor> losses;
        for (std::size_t i : batch) {
          const auto& t = train[i];
          const Tensor chosen = loss::log_ratios(lm::token_logprobs_tensor(model, t.prompt, t.chosen), ref_chosen[i]);
          const Tensor rejected =
              loss::log_ratios(lm::token_logprobs_tensor(model, t.prompt, t.rejected), ref_rejected[i]);
          const reward::TokenWeights q = reward::noisy_weights(rejected.data(), v);
          if (on_q) on_q(report.steps, i, q);
          tokens += q.size();
          masked += static_cast<std::size_t>(std::count(q.begin(), q.end(), std::uint8_t{0}));
          losses.push_back(loss::dpo_objective(chosen, rejected, q, cfg.beta));
        }
        return lm::batch_mean(losses);
      });
      report.losses.push_back(s.loss);
      if (sink) {
        sink({report.steps, "learn", s.loss, static_cast<double>(masked) / static_cast<double>(tokens), s.grad_norm,
              cfg.optimizer.learning_rate});
      }
      ++report.steps;
    }
  }
  return report;
}

}  // namespace allo::pipeline
