// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "allo/error.hpp"
#include "allo/reward.hpp"
#include "allo/tasks.hpp"
#include "allo/vocab.hpp"
#include "test_util.hpp"

namespace allo::reward {
namespace {

class FixedScorer final : public TokenScorer {
 public:
  explicit FixedScorer(std::vector<double> keep) : keep_(std::move(keep)) {}
  std::vector<double> keep_probabilities(const data::PreferenceTriple&) const override { return keep_; }

 private:
  std::vector<double> keep_;
};

data::PreferenceTriple triple(lm::Tokens chosen, lm::Tokens rejected) {
  return {{40, 41}, std::move(chosen), std::move(rejected), std::nullopt, false};
}

// Brute force: token j is dropped when fewer than floor(v n / 100) tokens
// outrank it, where k outranks j if its ratio is larger or equal and earlier.
TokenWeights rank_oracle(const std::vector<double>& ratios, double v) {
  const std::size_t n = ratios.size();
  const auto zeros = static_cast<std::size_t>(std::floor(v * static_cast<double>(n) / 100.0));
  TokenWeights q(n, 1);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t above = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (ratios[k] > ratios[j] || (ratios[k] == ratios[j] && k < j)) ++above;
    }
    if (above < zeros) q[j] = 0;
  }
  return q;
}

TEST(ScoreUnaligned, ThresholdIsStrict) {
  const FixedScorer s({0.94, 0.95, 0.96, 0.0});
  EXPECT_EQ(score_unaligned(s, triple({5, 0}, {6, 7, 8, 0}), 0.95), (TokenWeights{1, 0, 0, 1}));
}

TEST(ScoreUnaligned, Errors) {
  const FixedScorer s({0.5});
  EXPECT_THROW(score_unaligned(s, triple({5, 0}, {6, 0}), 0.5), ScorerError);
  EXPECT_THROW(score_unaligned(FixedScorer({0.5, NAN}), triple({5, 0}, {6, 0}), 0.5), ScorerError);
  EXPECT_THROW(score_unaligned(FixedScorer({0.5, 0.5}), triple({5, 0}, {6, 0}), 1.0), ContractError);
  EXPECT_THROW(score_unaligned(FixedScorer({0.5, 0.5}), triple({5, 0}, {6, 0}), 0.0), ContractError);
}

TEST(OracleDiff, IdenticalResponsesAreAligned) {
  const OracleDiffScorer s;
  EXPECT_EQ(score_unaligned(s, triple({5, 6, 7, 0}, {5, 6, 7, 0}), 0.95), (TokenWeights{0, 0, 0, 0}));
}

TEST(OracleDiff, SingleSubstitution) {
  const OracleDiffScorer s;
  EXPECT_EQ(s.keep_probabilities(triple({5, 6, 7, 0}, {5, 9, 7, 0})), (std::vector<double>{1, 0, 1, 1}));
}

TEST(OracleDiff, InsertedSuffix) {
  const OracleDiffScorer s;
  EXPECT_EQ(score_unaligned(s, triple({5, 6, 0}, {5, 6, 8, 9, 0}), 0.95), (TokenWeights{0, 0, 1, 1, 0}));
}

TEST(OracleDiff, MatchesTaskTruth) {
  data::SyntheticTaskSpec spec;
  spec.n_train = 300;
  spec.n_test = 10;
  const OracleDiffScorer s;
  for (const auto& t : data::generate_task(spec, data::Vocabulary{}).train) {
    const TokenWeights r = score_unaligned(s, t, 0.95);
    TokenWeights truth(t.rejected.size(), 0);
    for (std::size_t j : *t.truth_unaligned) truth[j] = 1;
    ASSERT_EQ(r, truth);
  }
}

TEST(ModelScorer, UniformModelMarksEverything) {
  lm::Model m = lm::Model::init(testing::tiny_config(1));
  for (auto name : {"head.weight", "head.bias"}) {
    for (double& x : m.param(name).mutable_data()) x = 0.0;
  }
  const ModelScorer s(std::move(m));
  for (double p : s.keep_probabilities(triple({5, 0}, {6, 7, 0}))) EXPECT_NEAR(p, 1.0 / 98.0, 1e-12);
  EXPECT_EQ(score_unaligned(s, triple({5, 0}, {6, 7, 0}), 0.95), (TokenWeights{1, 1, 1}));
}

TEST(ModelScorer, RevisionPrompt) {
  EXPECT_EQ(revision_prompt(triple({5, 6, 0}, {7, 0}), "revise-v1"), (lm::Tokens{40, 41, 2, 5, 6, 2, 7, 2}));
  EXPECT_THROW(revision_prompt(triple({5, 0}, {7, 0}), "revise-v9"), ScorerError);
}

TEST(ModelScorer, Errors) {
  EXPECT_THROW(ModelScorer::from_checkpoint("/nonexistent/scorer.bin"), ScorerError);
  EXPECT_THROW(ModelScorer(lm::Model::init(testing::tiny_config()), "other"), ScorerError);
  const ModelScorer s(lm::Model::init(testing::tiny_config()));
  EXPECT_THROW(s.keep_probabilities(triple(lm::Tokens(12, 5), lm::Tokens(12, 6))), ScorerError);
}

TEST(NoisyWeights, TenTokensDropTwo) {
  const std::vector<double> ratios{0.1, 0.9, -0.3, 0.5, 0.9, 0.0, 0.2, -1.0, 0.3, 0.4};
  EXPECT_EQ(noisy_weights(ratios, 20.0), (TokenWeights{1, 0, 1, 1, 0, 1, 1, 1, 1, 1}));
  EXPECT_EQ(noisy_weights(ratios, 0.0), TokenWeights(10, 1));
}

TEST(NoisyWeights, MatchesRankOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 30.0);
    std::vector<double> ratios(n);
    // Coarse values so that ties are common.
    for (double& x : ratios) x = std::round(rng.normal() * 2.0) / 2.0;
    const double v = std::floor(rng.uniform() * 100.0);
    ASSERT_EQ(noisy_weights(ratios, v), rank_oracle(ratios, v)) << "n=" << n << " v=" << v;
  }
}

TEST(NoisyWeights, Errors) {
  const std::vector<double> ratios{0.0};
  EXPECT_THROW(noisy_weights(ratios, 100.0), ContractError);
  EXPECT_THROW(noisy_weights(ratios, -1.0), ContractError);
}

TEST(NoisyWeights, IdenticalModelsKeepOrder) {
  const lm::Model m = lm::Model::init(testing::tiny_config(2));
  // All ratios are zero, so the earliest positions are dropped.
  EXPECT_EQ(identify_noisy(m, m.clone(), {40}, {5, 6, 7, 8, 0}, 40.0), (TokenWeights{0, 0, 1, 1, 1}));
}

TEST(RCache, RoundTripAndHashMismatch) {
  const testing::TempDir dir("rcache");
  const std::vector<TokenWeights> r{{0, 1, 1}, {}, {1}};
  write_r_cache(dir / "r.jsonl", "abc", r);
  EXPECT_EQ(read_r_cache(dir / "r.jsonl", "abc"), r);
  EXPECT_FALSE(read_r_cache(dir / "r.jsonl", "abd").has_value());
  EXPECT_FALSE(read_r_cache(dir / "missing.jsonl", "abc").has_value());
}

}  // namespace
}  // namespace allo::reward
