// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration. The text form is one "section.key = value" per line;
// '#' starts a comment. Unknown or repeated keys are errors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "allo/atlas.hpp"
#include "allo/model.hpp"
#include "allo/optim.hpp"
#include "allo/tasks.hpp"

namespace allo::pipeline {

/// Which neurons a stage may update. `none` trains every element.
enum class StageMask { top, last, random, none };
std::string to_string(StageMask mask);
StageMask parse_stage_mask(const std::string& text);

struct DataConfig {
  data::SyntheticTaskSpec synthetic;
  /// When set, triples are read from JSONL instead of being generated.
  std::string train_path;
  std::string test_path;
  std::string sft_path;
};

struct SftConfig {
  std::size_t epochs = 30;
  OptimizerConfig optimizer{OptimizerKind::adam, 3e-3};
  std::size_t batch = 16;
};

struct Stage1Config {
  atlas::WarmupMethod method = atlas::WarmupMethod::dpo;
  OptimizerConfig optimizer{OptimizerKind::sgd, 1e-2};
  std::size_t batch = 16;
  double beta = 0.1;
  double k1 = 5.0;   // percent
  double k2 = 10.0;  // percent
  atlas::MaskScope scope = atlas::MaskScope::global;
  bool include_embeddings_and_norms = true;
};

struct ForgetConfig {
  bool enabled = true;
  OptimizerConfig optimizer{OptimizerKind::sgd, 3e-2};
  std::size_t batch = 16;
  std::size_t epochs = 1;
  double beta = 0.1;
  double u = 0.95;
  bool token_reward = true;
  StageMask mask = StageMask::top;
  std::string scorer = "oracle-diff";
  std::string scorer_checkpoint;
  std::string scorer_template = "revise-v1";
  bool drop_masked_tokens = false;
};

struct LearnConfig {
  bool enabled = true;
  OptimizerConfig optimizer{OptimizerKind::sgd, 3e-2};
  std::size_t batch = 16;
  std::size_t epochs = 1;
  double beta = 0.1;
  double v = 20.0;  // percent
  bool token_reward = true;
  StageMask mask = StageMask::top;
};

struct EvalConfig {
  double loss_threshold = 0.65;
  std::size_t max_len = 16;
};

struct RunConfig {
  lm::ModelConfig model{98, 32, 2, 2, 32, 0};
  std::string base_checkpoint;
  DataConfig data;
  SftConfig sft;
  Stage1Config stage1;
  ForgetConfig forget;
  LearnConfig learn;
  EvalConfig eval;
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  /// Throws ConfigError naming the offending key and constraint.
  void validate() const;
  /// Assigns one key from text. Throws ConfigError for unknown keys or
  /// unparsable values; does not validate cross-field constraints.
  void set(const std::string& key, const std::string& value);
  /// Every key with its canonical text value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;
  /// FNV-1a digest of to_text() without run.out_dir, as 16 hex digits.
  std::string digest() const;

  /// Applies "section.key = value" lines on top of `base`.
  static RunConfig parse(const std::string& text, RunConfig base);
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path, const RunConfig& base);
  static RunConfig load(const std::filesystem::path& path);
};

/// Configurations carrying the published hyper-parameters for the
/// question-answering ("paper-qa"), math ("paper-math") and alignment
/// ("paper-alignment") settings; everything else keeps its default.
RunConfig preset(const std::string& name);

}  // namespace allo::pipeline
