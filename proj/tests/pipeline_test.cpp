// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "allo/checkpoint.hpp"
#include "allo/config.hpp"
#include "allo/error.hpp"
#include "allo/pipeline.hpp"
#include "test_util.hpp"

namespace allo::pipeline {
namespace {

std::string config_error(const std::string& text) {
  try {
    RunConfig::parse(text).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, ConstraintErrorsNameTheKey) {
  EXPECT_NE(config_error("stage1.k1 = 0").find("stage1.k1"), std::string::npos);
  EXPECT_NE(config_error("stage1.k2 = 101").find("stage1.k2"), std::string::npos);
  EXPECT_NE(config_error("forget.u = 1").find("forget.u"), std::string::npos);
  EXPECT_NE(config_error("learn.v = 100").find("learn.v"), std::string::npos);
  EXPECT_NE(config_error("learn.lr = 0").find("learn.lr"), std::string::npos);
  EXPECT_NE(config_error("model.vocab_size = 50").find("model.vocab_size"), std::string::npos);
  EXPECT_NE(config_error("forget.scorer = model").find("scorer_checkpoint"), std::string::npos);
  EXPECT_EQ(config_error("learn.v = 0\nforget.u = 0.5"), "");
}

TEST(Config, UnknownDuplicateAndMalformed) {
  EXPECT_THROW(RunConfig::parse("learn.gamma = 1"), ConfigError);
  EXPECT_THROW(RunConfig::parse("learn.v = 1\nlearn.v = 2"), ConfigError);
  EXPECT_THROW(RunConfig::parse("learn.v"), ConfigError);
  EXPECT_THROW(RunConfig::parse("learn.epochs = two"), ConfigError);
  EXPECT_THROW(RunConfig::parse("learn.token_reward = maybe"), ConfigError);
  EXPECT_THROW(RunConfig::parse("learn.mask = bottom"), ConfigError);
}

TEST(Config, CommentsAndRoundTrip) {
  const RunConfig c = RunConfig::parse("# note\nlearn.v = 30  # inline\n\nstage1.scope = per-tensor\n");
  EXPECT_EQ(c.learn.v, 30.0);
  EXPECT_EQ(c.stage1.scope, atlas::MaskScope::per_tensor);
  const RunConfig back = RunConfig::parse(c.to_text());
  EXPECT_EQ(back.entries(), c.entries());
  EXPECT_EQ(back.digest(), c.digest());
}

TEST(Config, DigestIgnoresOutDirOnly) {
  RunConfig a, b;
  b.out_dir = "elsewhere";
  EXPECT_EQ(a.digest(), b.digest());
  b.learn.v = 21.0;
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 16u);
}

TEST(Config, Presets) {
  const RunConfig qa = preset("paper-qa");
  EXPECT_EQ(qa.stage1.k1, 5.0);
  EXPECT_EQ(qa.stage1.k2, 10.0);
  EXPECT_EQ(qa.learn.v, 20.0);
  EXPECT_EQ(qa.forget.u, 0.95);
  EXPECT_EQ(qa.learn.batch, 32u);
  const RunConfig math = preset("paper-math");
  EXPECT_EQ(math.stage1.k2, 20.0);
  EXPECT_EQ(math.learn.v, 50.0);
  EXPECT_EQ(math.learn.optimizer.learning_rate, 1e-6);
  const RunConfig al = preset("paper-alignment");
  EXPECT_EQ(al.stage1.k1, 10.0);
  EXPECT_EQ(al.stage1.k2, 15.0);
  EXPECT_EQ(al.learn.batch, 128u);
  for (const auto& name : {"desk", "paper-qa", "paper-math", "paper-alignment"}) EXPECT_NO_THROW(preset(name).validate());
  EXPECT_THROW(preset("paper-code"), ConfigError);
}

class Stages : public ::testing::Test {
 protected:
  Stages() : base_(lm::Model::init(testing::tiny_config(4))) {
    Rng rng(9);
    for (int i = 0; i < 24; ++i) train_.push_back(testing::random_triple(rng, 6));
  }

  lm::Model base_;
  std::vector<data::PreferenceTriple> train_;
};

TEST_F(Stages, LocateMaskPopcounts) {
  const LocateResult r = run_locate(base_, train_, Stage1Config{}, 0);
  const auto n = static_cast<double>(base_.neuron_count());
  EXPECT_EQ(r.n1.popcount(), static_cast<std::size_t>(std::llround(0.05 * n)));
  EXPECT_EQ(r.n2.popcount(), static_cast<std::size_t>(std::llround(0.10 * n)));
  for (std::size_t t = 0; t < r.n1.bits.size(); ++t) {
    for (std::size_t i = 0; i < r.n1.bits[t].size(); ++i) {
      if (r.n1.bits[t][i]) ASSERT_TRUE(r.n2.bits[t][i]);
    }
  }
  EXPECT_EQ(r.warmup_losses.size(), 2u);
}

TEST_F(Stages, LocateRejectsZeroLearningRate) {
  Stage1Config cfg;
  cfg.optimizer.learning_rate = 0.0;
  EXPECT_THROW(run_locate(base_, train_, cfg, 0), ContractError);
}

TEST_F(Stages, ForgetSkipsDegenerateTriples) {
  std::vector<data::PreferenceTriple> same = train_;
  for (auto& t : same) t.rejected = t.chosen;
  lm::Model m = base_.clone();
  std::vector<reward::TokenWeights> r;
  for (const auto& t : same) r.emplace_back(t.rejected.size(), 1);
  const StageReport rep = run_forget(m, atlas::full_mask(m.layout()), same, r, ForgetConfig{}, 0);
  EXPECT_EQ(rep.steps, 0u);
  EXPECT_EQ(m.hash(), base_.hash());
}

TEST_F(Stages, LearnIdenticalPairsHaveZeroGradient) {
  std::vector<data::PreferenceTriple> same = train_;
  for (auto& t : same) t.rejected = t.chosen;
  lm::Model m = base_.clone();
  LearnConfig cfg;
  cfg.v = 0.0;
  const StageReport rep = run_learn(m, atlas::full_mask(m.layout()), same, cfg, 0);
  EXPECT_GT(rep.steps, 0u);
  // The two response gradients cancel up to summation order.
  double worst = 0.0;
  for (std::size_t p = 0; p < m.params().size(); ++p) {
    for (std::size_t i = 0; i < m.params()[p].data().size(); ++i) {
      worst = std::max(worst, std::abs(m.params()[p][i] - base_.params()[p][i]));
    }
  }
  EXPECT_LE(worst, 1e-12);
}

TEST_F(Stages, ZeroMaskTrainsNothing) {
  lm::Model m = base_.clone();
  atlas::NeuronMask none = atlas::full_mask(m.layout());
  for (auto& b : none.bits) std::fill(b.begin(), b.end(), std::uint8_t{0});
  run_learn(m, none, train_, LearnConfig{}, 0);
  EXPECT_EQ(m.hash(), base_.hash());
}

TEST_F(Stages, MaskLayoutMismatchIsContractError) {
  lm::Model m = base_.clone();
  const atlas::NeuronMask other = atlas::full_mask(lm::param_layout({98, 32, 1, 2, 16, 0}));
  EXPECT_THROW(run_learn(m, other, train_, LearnConfig{}, 0), ContractError);
}

TEST_F(Stages, ScoreDatasetUsesCache) {
  const testing::TempDir dir("score-cache");
  const reward::OracleDiffScorer scorer;
  const auto r = score_dataset(scorer, train_, 0.95, dir / "r.jsonl");
  ASSERT_TRUE(std::filesystem::exists(dir / "r.jsonl"));
  EXPECT_EQ(score_dataset(scorer, train_, 0.95, dir / "r.jsonl"), r);
}

TEST(RunAllo, SmallRunWritesArtifacts) {
  const testing::TempDir dir("run-allo");
  RunConfig cfg = RunConfig::parse(
      "model.d_model = 16\n"
      "data.n_train = 32\n"
      "data.n_test = 8\n"
      "sft.epochs = 2\n"
      "learn.epochs = 1\n");
  cfg.out_dir = (dir / "out").string();
  const RunResult r = run_allo(cfg);
  ASSERT_TRUE(r.manifest.ok);
  ASSERT_EQ(r.manifest.stages.size(), 4u);
  for (const auto& s : r.manifest.stages) EXPECT_EQ(s.status, "completed") << s.name;
  for (const auto* f : {"manifest.json", "metrics.csv", "ckpt-sft.bin", "ckpt-forget.bin", "ckpt-learn.bin",
                        "importance.bin", "mask-5.bin", "mask-10.bin"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / f)) << f;
  }
  ASSERT_TRUE(r.final_model);
  EXPECT_EQ(lm::load_checkpoint(dir / "out" / "ckpt-learn.bin").hash(), r.final_model->hash());
  std::ifstream csv(dir / "out" / "metrics.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "step,stage,loss,masked_token_fraction,grad_norm,lr");
}

TEST(RunAllo, FailingStageIsRecorded) {
  const testing::TempDir dir("run-fail");
  RunConfig cfg = RunConfig::parse("model.d_model = 16\ndata.n_train = 16\ndata.n_test = 4\nsft.epochs = 1\n");
  cfg.forget.scorer = "model";
  cfg.forget.scorer_checkpoint = (dir / "missing.bin").string();
  cfg.out_dir = (dir / "out").string();
  const RunResult r = run_allo(cfg);
  EXPECT_FALSE(r.manifest.ok);
  EXPECT_FALSE(r.final_model);
  ASSERT_EQ(r.manifest.stages.size(), 3u);
  EXPECT_EQ(r.manifest.stages[2].status, "failed");
  EXPECT_NE(r.manifest.stages[2].error.find("missing.bin"), std::string::npos);
  EXPECT_EQ(r.manifest.skipped, std::vector<std::string>{"learn"});
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "manifest.json"));
}

}  // namespace
}  // namespace allo::pipeline
