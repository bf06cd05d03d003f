// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>

#include "allo/dataset.hpp"
#include "allo/model.hpp"
#include "allo/random.hpp"

namespace allo::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("allo-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline lm::Tokens random_tokens(Rng& rng, std::size_t len, bool eos, std::uint64_t vocab = 98) {
  lm::Tokens out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(static_cast<lm::TokenId>(3 + rng.below(vocab - 3)));
  if (eos) out.push_back(lm::kEosToken);
  return out;
}

inline data::PreferenceTriple random_triple(Rng& rng, std::size_t max_len, std::uint64_t vocab = 98) {
  data::PreferenceTriple t;
  t.prompt = random_tokens(rng, 1 + rng.below(max_len), false, vocab);
  t.chosen = random_tokens(rng, rng.below(max_len), true, vocab);
  t.rejected = random_tokens(rng, rng.below(max_len), true, vocab);
  return t;
}

inline lm::ModelConfig tiny_config(std::uint64_t seed = 0) { return {98, 32, 2, 2, 16, seed}; }

}  // namespace allo::testing
