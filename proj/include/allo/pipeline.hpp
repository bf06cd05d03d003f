// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// The three-stage run: locate key neurons from a warm-up, forget unaligned
// tokens with masked token-level NPO, then learn with masked token-level DPO.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "allo/atlas.hpp"
#include "allo/config.hpp"
#include "allo/dataset.hpp"
#include "allo/model.hpp"
#include "allo/reward.hpp"

namespace allo::pipeline {

struct MetricRow {
  std::size_t step = 0;
  std::string stage;
  double loss = 0.0;
  /// Fraction of rejected-response tokens whose weight was 0 in the batch.
  double masked_token_fraction = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
};

/// Receives one row per optimizer step.
using MetricsSink = std::function<void(const MetricRow&)>;

struct PreparedData {
  std::vector<data::PreferenceTriple> train;
  std::vector<data::SftExample> sft;
  std::optional<data::TestSet> test;
  std::string dataset_hash;
};

/// Generates the synthetic task or reads the configured JSONL files.
PreparedData prepare_data(const RunConfig& cfg);

/// Next-token cross-entropy on the response tokens, starting from
/// Model::init(model_cfg). Throws ConfigError on an empty corpus.
lm::Model sft_fit(const lm::ModelConfig& model_cfg, const std::vector<data::SftExample>& corpus,
                  const SftConfig& cfg, std::uint64_t seed, const MetricsSink& sink = {});

struct LocateResult {
  atlas::ImportanceMap importance;
  atlas::NeuronMask n1;
  atlas::NeuronMask n2;
  std::vector<double> warmup_losses;
  std::uint64_t reference_hash = 0;
};

/// Warm-up on a copy of `base`, importance from the weight change, and the
/// top-k1% / top-k2% masks. `base` is not modified.
LocateResult run_locate(const lm::Model& base, const std::vector<data::PreferenceTriple>& train,
                        const Stage1Config& cfg, std::uint64_t seed, const MetricsSink& sink = {});

/// The mask a stage trains under, derived from the single importance map.
atlas::NeuronMask stage_mask(const atlas::ImportanceMap& importance, StageMask mode, double ratio_percent,
                             const Stage1Config& cfg, std::uint64_t seed);

/// r for every triple, read from `cache_path` when it matches the dataset and
/// written there otherwise (empty path disables caching).
std::vector<reward::TokenWeights> score_dataset(const reward::TokenScorer& scorer,
                                                const std::vector<data::PreferenceTriple>& triples, double u,
                                                const std::filesystem::path& cache_path = {});

struct StageReport {
  std::size_t steps = 0;
  std::uint64_t entry_hash = 0;
  std::uint64_t reference_hash = 0;
  std::vector<double> losses;
};

/// Masked token-level NPO against the stage-entry snapshot. Degenerate
/// triples are skipped. Trains `model` in place; if an error escapes,
/// `model` holds the parameters after the last completed step.
StageReport run_forget(lm::Model& model, const atlas::NeuronMask& mask,
                       const std::vector<data::PreferenceTriple>& train, const std::vector<reward::TokenWeights>& r,
                       const ForgetConfig& cfg, std::uint64_t seed, const MetricsSink& sink = {});

/// Sees every q vector as it is computed: (stage step, triple index, q).
using WeightObserver = std::function<void(std::size_t, std::size_t, const reward::TokenWeights&)>;

/// Masked token-level DPO against the stage-entry snapshot, with q
/// recomputed from the current policy at every step (v = 0 when
/// cfg.token_reward is off). Same in-place contract as run_forget.
StageReport run_learn(lm::Model& model, const atlas::NeuronMask& mask,
                      const std::vector<data::PreferenceTriple>& train, const LearnConfig& cfg, std::uint64_t seed,
                      const MetricsSink& sink = {}, const WeightObserver& on_q = {});

struct StageRecord {
  std::string name;
  std::string status;  // completed | failed
  std::string checkpoint;
  std::string entry_hash;
  std::string reference_hash;
  std::size_t steps = 0;
  double seconds = 0.0;
  std::string error;
};

struct RunManifest {
  std::string config_digest;
  std::vector<std::pair<std::string, std::string>> config;
  std::string dataset_hash;
  std::vector<StageRecord> stages;
  std::vector<std::string> skipped;
  std::vector<std::pair<std::string, std::string>> artifacts;
  double wall_clock_seconds = 0.0;
  bool ok = true;

  std::string to_json() const;
};

struct RunResult {
  RunManifest manifest;
  std::optional<lm::Model> final_model;
  PreparedData data;
  /// Every metrics.csv row, with global step numbers.
  std::vector<MetricRow> metrics;
};

/// Stage order sft (when model.base_checkpoint is empty), locate, forget,
/// learn. Writes manifest.json, metrics.csv, ckpt-{stage}.bin,
/// importance.bin and mask files under cfg.out_dir. A failing stage is
/// recorded and the remaining stages are skipped.
struct RunHooks {
  WeightObserver on_q;
};

RunResult run_allo(const RunConfig& cfg, const RunHooks& hooks = {});

/// step,stage,loss,masked_token_fraction,grad_norm,lr
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

/// Hex form used for hashes in manifests.
std::string hex(std::uint64_t value);

}  // namespace allo::pipeline
