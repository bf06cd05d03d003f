// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic alignment tasks with known unaligned tokens.
//
//   spurious-suffix    "abc=" -> "ABC"; rejected appends a stylistic suffix
//                      such as " lol". The suffix tokens are the unaligned ones.
//   keyed-lookup       "abc:" -> T[a]T[b]T[c] for a secret letter permutation T.
//                      Rejected answers use an outdated table whose entries
//                      were replaced by letters from Q..Z with probability
//                      corruption_rate; replaced letters are the unaligned ones.
//   biased-arithmetic  "a+b=" -> decimal sum; rejected adds digit-wise and
//                      drops carries. Only carrying sums are used for training.
//
// Each task also emits an SFT corpus over the training prompts in which a
// fraction sft_noise of responses are the rejected ones, so the SFT model
// starts out with the unwanted behaviour.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "allo/dataset.hpp"

namespace allo::data {

enum class TaskKind { spurious_suffix, keyed_lookup, biased_arithmetic };

std::string to_string(TaskKind kind);
/// Accepts "spurious-suffix", "keyed-lookup", "biased-arithmetic".
TaskKind parse_task_kind(const std::string& text);

struct SyntheticTaskSpec {
  TaskKind kind = TaskKind::spurious_suffix;
  std::size_t n_train = 2000;
  std::size_t n_test = 200;
  double corruption_rate = 0.5;
  double sft_noise = 0.6;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

struct SyntheticTask {
  std::vector<PreferenceTriple> train;
  std::vector<SftExample> sft;
  TestSet test;
};

/// Deterministic in `spec`. Train and test prompts are disjoint. Throws
/// CapacityError when the prompt space cannot supply the requested counts.
SyntheticTask generate_task(const SyntheticTaskSpec& spec, const Vocabulary& vocab);

/// Number of distinct usable train + test prompts for a task kind.
std::size_t task_capacity(TaskKind kind);

}  // namespace allo::data
