// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "allo/cli.hpp"
#include "allo/error.hpp"
#include "allo/eval.hpp"
#include "test_util.hpp"

namespace allo {
namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "allo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::dispatch(static_cast<int>(argv.size()), argv.data());
}

TEST(Evaluate, EmptyTestSetIsContractError) {
  data::TestSet empty;
  EXPECT_THROW(eval::evaluate(lm::Model::init(testing::tiny_config()), empty, 8), ContractError);
}

TEST(Evaluate, CountsAndRecords) {
  data::SyntheticTaskSpec spec;
  spec.n_train = 10;
  spec.n_test = 6;
  const auto task = data::generate_task(spec, data::Vocabulary{});
  const eval::EvalReport r = eval::evaluate(lm::Model::init(testing::tiny_config(1)), task.test, 6);
  EXPECT_EQ(r.n, 6u);
  EXPECT_EQ(r.records.size(), 6u);
  EXPECT_EQ(r.accuracy, static_cast<double>(r.correct) / 6.0);
}

TEST(CompareRuns, Errors) {
  const eval::CurveRecord a{"a", {{0, 1.0}, {1, 0.5}}, std::nullopt};
  EXPECT_THROW(eval::compare_runs({a}), ContractError);
  EXPECT_THROW(eval::compare_runs({a, a}), ContractError);
  EXPECT_THROW(eval::compare_runs({a, {"b", {}, std::nullopt}}), ContractError);
  EXPECT_THROW(eval::compare_runs({a, {"b", {{3, 1.0}, {3, 0.9}}, std::nullopt}}), ContractError);
}

TEST(CompareRuns, IdenticalCurvesGiveIdenticalSummaries) {
  const std::vector<std::pair<std::size_t, double>> losses{{0, 0.69}, {1, 0.66}, {2, 0.64}, {3, 0.6}};
  const auto rows = eval::compare_runs({{"a", losses, 0.5}, {"b", losses, 0.5}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].steps_to_threshold, std::optional<std::size_t>{2});
  EXPECT_EQ(rows[0].steps_to_threshold, rows[1].steps_to_threshold);
  EXPECT_EQ(rows[0].final_loss, 0.6);
  EXPECT_EQ(rows[0].final_accuracy, rows[1].final_accuracy);
}

TEST(CompareRuns, NeverReachingThresholdIsNull) {
  const auto rows = eval::compare_runs({{"a", {{0, 0.75}}, std::nullopt}, {"b", {{0, 0.1}}, std::nullopt}});
  EXPECT_FALSE(rows[0].steps_to_threshold);
  EXPECT_NE(eval::comparison_csv(rows).find("a,0.75,,"), std::string::npos);
}

TEST(Curves, CsvRoundTrip) {
  const testing::TempDir dir("curves");
  const std::vector<eval::CurveRecord> curves{{"a", {{0, 0.7}, {5, 0.25}}, std::nullopt},
                                              {"b", {{1, 0.125}}, std::nullopt}};
  eval::write_curves_csv(dir / "c.csv", curves);
  const auto back = eval::read_curves_csv(dir / "c.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].losses, curves[0].losses);
  EXPECT_EQ(back[1].run, "b");
}

TEST(Grid, NineCellsAndSeedOffsets) {
  const auto cells = eval::ablation_cells();
  ASSERT_EQ(cells.size(), 9u);
  EXPECT_EQ(cells.front().id, "default");
  pipeline::RunConfig base;
  base.model.seed = 10;
  const pipeline::RunConfig s = eval::with_seed(base, 3);
  EXPECT_EQ(s.seed, 3u);
  EXPECT_EQ(s.model.seed, 13u);
  EXPECT_EQ(s.data.synthetic.seed, base.data.synthetic.seed + 3);
}

TEST(Cli, HelpAndUsageErrors) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run_cli({"--help"}), 0);
  EXPECT_EQ(run_cli({"run-allo", "--bogus"}), 1);
  EXPECT_EQ(run_cli({}), 1);
  EXPECT_EQ(run_cli({"gen-data", "--set", "stage1.k1=0"}), 1);
  EXPECT_EQ(run_cli({"gen-data", "--set", "stage1.k1"}), 1);
  ::testing::internal::GetCapturedStderr();
}

TEST(Cli, MissingCheckpointIsRuntimeFailure) {
  const testing::TempDir dir("cli-eval");
  ::testing::internal::CaptureStderr();
  const int code = run_cli({"eval", "--checkpoint", (dir / "nope.bin").string(), "--out", (dir / "out").string()});
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, 2);
  EXPECT_NE(err.find("nope.bin"), std::string::npos) << err;
}

TEST(Cli, GenDataWritesFiles) {
  const testing::TempDir dir("cli-gen");
  ::testing::internal::CaptureStderr();
  const int code = run_cli({"gen-data", "--set", "data.n_train=20", "--set", "data.n_test=5", "--out",
                            (dir / "out").string()});
  ::testing::internal::GetCapturedStderr();
  ASSERT_EQ(code, 0);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "out")) files += e.path().extension() == ".jsonl";
  EXPECT_GE(files, 3u);
}

}  // namespace
}  // namespace allo
