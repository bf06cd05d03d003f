// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Preference triples, SFT pairs and held-out test sets, with their JSONL
// readers and writers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "allo/model.hpp"
#include "allo/vocab.hpp"

namespace allo::data {

struct PreferenceTriple {
  Tokens prompt;
  Tokens chosen;
  Tokens rejected;
  /// Positions in `rejected` that carry the unaligned content, when known.
  std::optional<std::vector<std::size_t>> truth_unaligned;
  /// rejected == chosen (negative synthesis failed to produce a distinct response).
  bool degenerate = false;

  /// Throws ContractError on empty prompt/chosen/rejected or out-of-range
  /// truth indices.
  void validate() const;
};

struct SftExample {
  Tokens prompt;
  Tokens response;
};

struct TestExample {
  Tokens prompt;
  std::string answer;
};

struct TestSet {
  std::string task;
  std::vector<TestExample> examples;
  /// Substrings whose presence in an output counts as the spurious pattern.
  std::vector<std::string> spurious_markers;
};

struct LoadReport {
  std::vector<PreferenceTriple> triples;
  std::size_t skipped_overlong = 0;
  std::vector<std::string> warnings;
};

/// Records {"prompt", "chosen", "rejected", "unaligned_indices"?}. Responses
/// are encoded with a trailing end-of-sequence token. Records whose prompt
/// plus longer response exceeds `context_len` are skipped and counted.
/// Malformed records raise ParseError with the 1-based line number.
LoadReport load_jsonl(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t context_len);
void write_jsonl(const std::filesystem::path& path, const std::vector<PreferenceTriple>& triples,
                 const Vocabulary& vocab);

std::vector<SftExample> load_sft_jsonl(const std::filesystem::path& path, const Vocabulary& vocab);
void write_sft_jsonl(const std::filesystem::path& path, const std::vector<SftExample>& examples,
                     const Vocabulary& vocab);

TestSet load_test_jsonl(const std::filesystem::path& path, const Vocabulary& vocab);
void write_test_jsonl(const std::filesystem::path& path, const TestSet& test, const Vocabulary& vocab);

/// FNV-1a digest over all token sequences, as 16 hex digits.
std::string dataset_hash(const std::vector<PreferenceTriple>& triples);

/// Builds a triple whose rejected response is sampled from `model`. A sample
/// equal to `chosen` is redrawn with seed+1, seed+2, ... up to `max_retries`
/// times; if every draw matches, the triple is returned flagged degenerate.
PreferenceTriple synthesize_negative(const lm::Model& model, const Tokens& prompt, const Tokens& chosen,
                                     double temperature, std::uint64_t seed, std::size_t max_retries = 8);

}  // namespace allo::data
