// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "allo/error.hpp"
#include "allo/losses.hpp"
#include "allo/train.hpp"
#include "test_util.hpp"

namespace allo::loss {
namespace {

constexpr double kTol = 1e-6;

TEST(Objectives, DpoHandValues) {
  EXPECT_NEAR(dpo_objective(Tensor::vector({1.0, 1.0}), Tensor::vector({0.0, 0.0}), TokenWeights{1, 1}, 0.1).item(),
              0.598139, kTol);
  EXPECT_NEAR(dpo_objective(Tensor::vector({0.0}), Tensor::vector({2.0}), TokenWeights{1}, 0.1).item(), 0.798139,
              kTol);
}

TEST(Objectives, DpoTokenDropsZeroWeightTokens) {
  const double l =
      dpo_objective(Tensor::vector({2.0}), Tensor::vector({1.5, -0.7, 9.0}), TokenWeights{1, 1, 0}, 0.1).item();
  EXPECT_NEAR(l, 0.634946, kTol);
}

TEST(Objectives, NpoHandValue) {
  EXPECT_NEAR(npo_objective(Tensor::vector({-1.0, 0.5}), 0.1).item(), 0.668460, kTol);
}

TEST(Objectives, NpoTokenMaskedTokensCostLn2) {
  const Tensor ratios = Tensor::vector({-3.0, 5.0});
  EXPECT_NEAR(npo_token_objective(ratios, TokenWeights{1, 0}, 0.1, false).item(), 0.554355 + std::log(2.0), kTol);
  EXPECT_NEAR(npo_token_objective(ratios, TokenWeights{1, 0}, 0.1, true).item(), 0.554355, kTol);
}

TEST(Objectives, LengthMismatchIsContractError) {
  EXPECT_THROW(dpo_objective(Tensor::vector({0.0}), Tensor::vector({1.0, 2.0}), TokenWeights{1}, 0.1), ContractError);
  EXPECT_THROW(npo_token_objective(Tensor::vector({1.0, 2.0}), TokenWeights{1, 1, 1}, 0.1, false), ContractError);
}

TEST(LossConfig, BetaMustBePositive) {
  EXPECT_THROW(LossConfig{0.0}.validate(), ContractError);
  EXPECT_NO_THROW(LossConfig{0.1}.validate());
}

class ModelLosses : public ::testing::Test {
 protected:
  ModelLosses() : policy_(lm::Model::init(testing::tiny_config(1))), reference_(lm::Model::init(testing::tiny_config(2))) {
    triple_.prompt = {40, 41, 42};
    triple_.chosen = {50, 51, 0};
    triple_.rejected = {50, 60, 61, 0};
  }

  lm::Model policy_;
  lm::Model reference_;
  data::PreferenceTriple triple_;
};

TEST_F(ModelLosses, TokenLogRatiosMatchTwoPasses) {
  const auto ratios = token_log_ratios(policy_, reference_, triple_.prompt, triple_.rejected);
  const auto p = lm::token_logprobs(policy_, triple_.prompt, triple_.rejected);
  const auto r = lm::token_logprobs(reference_, triple_.prompt, triple_.rejected);
  ASSERT_EQ(ratios.size(), 4u);
  for (std::size_t i = 0; i < ratios.size(); ++i) EXPECT_EQ(ratios[i], p[i] - r[i]);
}

TEST_F(ModelLosses, AllOnesQIsDpo) {
  const LossConfig cfg;
  const TokenWeights ones(triple_.rejected.size(), 1);
  EXPECT_EQ(dpo_token_loss(policy_, reference_, triple_, ones, cfg).item(),
            dpo_loss(policy_, reference_, triple_, cfg).item());
}

TEST_F(ModelLosses, IdenticalModelsGiveLn2) {
  const lm::Model clone = policy_.clone();
  EXPECT_NEAR(dpo_loss(policy_, clone, triple_, {}).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(npo_loss(policy_, clone, triple_, {}).item(), std::log(2.0), 1e-12);
}

TEST_F(ModelLosses, ZeroRGivesZeroGradientAndConstantLoss) {
  const TokenWeights zeros(triple_.rejected.size(), 0);
  const auto s = lm::compute_gradients(policy_, {}, [&] { return npo_token_loss(policy_, reference_, triple_, zeros, {}); });
  EXPECT_NEAR(s.loss, 4 * std::log(2.0), 1e-12);
  for (const auto& g : s.grads) {
    for (double x : g) EXPECT_EQ(x, 0.0);
  }
}

TEST_F(ModelLosses, ResponseLengthMismatchIsContractError) {
  EXPECT_THROW(npo_token_loss(policy_, reference_, triple_, TokenWeights{1, 1}, {}), ContractError);
  EXPECT_THROW(dpo_token_loss(policy_, reference_, triple_, TokenWeights{1}, {}), ContractError);
}

TEST_F(ModelLosses, ArchitectureMismatchIsContractError) {
  const lm::Model other = lm::Model::init({98, 32, 1, 2, 16, 0});
  EXPECT_THROW(dpo_loss(policy_, other, triple_, {}), ContractError);
}

TEST_F(ModelLosses, SftIgnoresPromptTokens) {
  const double a = sft_loss(policy_, {40, 41}, {50, 0}).item();
  const auto lp = lm::token_logprobs(policy_, {40, 41}, {50, 0});
  EXPECT_NEAR(a, -(lp[0] + lp[1]) / 2.0, 1e-12);
}

}  // namespace
}  // namespace allo::loss
