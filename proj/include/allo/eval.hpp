// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "allo/config.hpp"
#include "allo/dataset.hpp"
#include "allo/model.hpp"

namespace allo::eval {

struct ExampleRecord {
  std::string prompt;
  std::string output;
  std::string gold;
  bool correct = false;
  bool spurious = false;
  /// Prompt did not fit the context; counted as incorrect.
  bool overflow = false;
};

struct EvalReport {
  std::string task;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double spurious_rate = 0.0;
  std::vector<ExampleRecord> records;
};

/// Greedy decoding of up to `max_len` tokens per prompt; an output is correct
/// when it equals the gold answer after trimming surrounding whitespace.
/// Throws ContractError on an empty test set.
EvalReport evaluate(const lm::Model& model, const data::TestSet& test, std::size_t max_len);

/// task,n,accuracy,spurious_rate
void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);

struct CurveRecord {
  std::string run;
  std::vector<std::pair<std::size_t, double>> losses;  // (step, loss)
  std::optional<double> accuracy;
};

struct CurveSummary {
  std::string run;
  double final_loss = 0.0;
  std::optional<std::size_t> steps_to_threshold;
  std::optional<double> final_accuracy;
};

/// One summary row per curve. steps_to_threshold is the first step whose
/// loss is <= threshold. Throws ContractError for fewer than two curves,
/// repeated labels, empty curves or non-increasing steps.
std::vector<CurveSummary> compare_runs(const std::vector<CurveRecord>& curves, double threshold = 0.65);

/// run,step,loss
void write_curves_csv(const std::filesystem::path& path, const std::vector<CurveRecord>& curves);
std::vector<CurveRecord> read_curves_csv(const std::filesystem::path& path);

/// run,final_loss,steps_to_threshold,final_accuracy (empty cell for null).
std::string comparison_csv(const std::vector<CurveSummary>& rows);
std::string comparison_json(const std::vector<CurveSummary>& rows);

struct GridCell {
  std::string id;
  std::vector<std::pair<std::string, std::string>> overrides;
};

/// The nine forgetting/learning variants: default, learn-no-tlr,
/// forget-no-tlr, forget-no-mask, learn-no-mask, forget-last-k,
/// learn-last-k, no-forget, no-learn.
std::vector<GridCell> ablation_cells();

struct GridRow {
  std::string cell_id;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string status;  // completed | failed
  double accuracy = 0.0;
  double spurious_rate = 0.0;
  double final_loss = 0.0;
  std::string error;
};

/// Sets run.seed = s, and offsets model.seed and data.seed by s.
pipeline::RunConfig with_seed(const pipeline::RunConfig& cfg, std::uint64_t s);

/// Runs every cell for every seed under base.out_dir/<cell>/seed-<s>, after
/// one shared SFT run per seed when base.base_checkpoint is empty. Failed
/// cells are recorded and the grid continues.
std::vector<GridRow> run_ablation_grid(const pipeline::RunConfig& base, const std::vector<GridCell>& cells,
                                       const std::vector<std::uint64_t>& seeds);

/// cell_id,config_digest,accuracy,final_loss: one row per cell with the
/// mean over completed seeds.
void write_grid_csv(const std::filesystem::path& path, const std::vector<GridRow>& rows);
/// Same schema, one row per (cell, seed) with cell_id "<cell>@<seed>".
void write_grid_seed_csv(const std::filesystem::path& path, const std::vector<GridRow>& rows);

}  // namespace allo::eval
