// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Token weights over rejected responses: r marks unaligned tokens from a
// scorer's keep-probabilities, q drops the tokens whose policy/reference
// ratio is largest.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "allo/dataset.hpp"
#include "allo/losses.hpp"
#include "allo/model.hpp"

namespace allo::reward {

using loss::TokenWeights;

/// Produces, for each token of the rejected response, the probability that
/// a reviser keeps it unchanged.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;
  /// Throws ScorerError when no probabilities can be produced.
  virtual std::vector<double> keep_probabilities(const data::PreferenceTriple& triple) const = 0;
};

/// Minimum-edit alignment of rejected against chosen (unit costs). Matched
/// rejected tokens keep with probability 1, substituted or deleted ones 0.
class OracleDiffScorer final : public TokenScorer {
 public:
  std::vector<double> keep_probabilities(const data::PreferenceTriple& triple) const override;
};

/// Teacher-forced probabilities of a causal LM re-emitting the rejected
/// response after a revision prompt.
class ModelScorer final : public TokenScorer {
 public:
  static constexpr const char* kDefaultTemplate = "revise-v1";

  explicit ModelScorer(lm::Model model, std::string template_id = kDefaultTemplate);
  /// Throws ScorerError when the checkpoint cannot be loaded.
  static ModelScorer from_checkpoint(const std::filesystem::path& path, std::string template_id = kDefaultTemplate);

  std::vector<double> keep_probabilities(const data::PreferenceTriple& triple) const override;
  const lm::Model& model() const { return model_; }

 private:
  lm::Model model_;
  std::string template_id_;
};

/// revise-v1: prompt, '\n', chosen (without end-of-sequence), '\n', rejected
/// (without end-of-sequence), '\n'. The rejected response follows it.
lm::Tokens revision_prompt(const data::PreferenceTriple& triple, const std::string& template_id);

/// r_j = 1 where keep_probability_j < u. Requires 0 < u < 1.
TokenWeights score_unaligned(const TokenScorer& scorer, const data::PreferenceTriple& triple, double u);

/// q from per-token log-ratios: the floor(v/100 * len) largest ratios get 0,
/// earlier positions first among equal ratios. Requires 0 <= v < 100.
TokenWeights noisy_weights(std::span<const double> log_ratios, double v_percent);

/// noisy_weights over token_log_ratios(policy, reference, prompt, rejected).
TokenWeights identify_noisy(const lm::Model& policy, const lm::Model& reference, const lm::Tokens& prompt,
                            const lm::Tokens& rejected, double v_percent);

/// Sidecar cache of r vectors in dataset order, keyed by dataset hash.
void write_r_cache(const std::filesystem::path& path, const std::string& dataset_hash,
                   const std::vector<TokenWeights>& weights);
/// nullopt when the file is missing or was built for another dataset.
std::optional<std::vector<TokenWeights>> read_r_cache(const std::filesystem::path& path,
                                                      const std::string& dataset_hash);

}  // namespace allo::reward
