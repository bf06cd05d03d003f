// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/tasks.hpp"

#include <array>
#include <fmt/format.h>

#include "allo/error.hpp"
#include "allo/random.hpp"

namespace allo::data {
namespace {

constexpr int kLetters = 16;  // a..p
constexpr std::array<const char*, 4> kSuffixes = {" lol", " :)", " !!", " ok?"};

struct Sample {
  std::string prompt;
  std::string chosen;
  std::string rejected;
};

std::string word_of(int index) {
  std::string w(3, 'a');
  for (int i = 2; i >= 0; --i) {
    w[static_cast<std::size_t>(i)] = static_cast<char>('a' + index % kLetters);
    index /= kLetters;
  }
  return w;
}

std::string digit_sum_without_carry(int a, int b) {
  const int units = (a % 10 + b % 10) % 10;
  const int tens = (a / 10 + b / 10) % 10;
  return std::to_string(tens * 10 + units);
}

// Positions where rejected differs from chosen, for equal-length pairs.
std::vector<std::size_t> substitutions(const Tokens& chosen, const Tokens& rejected) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rejected.size(); ++i) {
    if (chosen[i] != rejected[i]) out.push_back(i);
  }
  return out;
}

}  // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::spurious_suffix: return "spurious-suffix";
    case TaskKind::keyed_lookup: return "keyed-lookup";
    case TaskKind::biased_arithmetic: return "biased-arithmetic";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& text) {
  for (TaskKind k : {TaskKind::spurious_suffix, TaskKind::keyed_lookup, TaskKind::biased_arithmetic}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError(fmt::format("unknown task kind '{}' (expected spurious-suffix, keyed-lookup or biased-arithmetic)",
                                text));
}

void SyntheticTaskSpec::validate() const {
  if (n_train == 0) throw ConfigError("data.n_train must be positive");
  if (n_test == 0) throw ConfigError("data.n_test must be positive");
  if (!(corruption_rate > 0.0 && corruption_rate <= 1.0)) {
    throw ConfigError(fmt::format("data.corruption_rate must be in (0, 1], got {}", corruption_rate));
  }
  if (!(sft_noise >= 0.0 && sft_noise <= 1.0)) {
    throw ConfigError(fmt::format("data.sft_noise must be in [0, 1], got {}", sft_noise));
  }
}

std::size_t task_capacity(TaskKind kind) {
  return kind == TaskKind::biased_arithmetic ? 100 * 100 : kLetters * kLetters * kLetters;
}

SyntheticTask generate_task(const SyntheticTaskSpec& spec, const Vocabulary& vocab) {
  spec.validate();
  Rng rng(spec.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(spec.kind) + 1);

  // Task tables.
  std::vector<char> table(kLetters), outdated(kLetters);
  if (spec.kind == TaskKind::keyed_lookup) {
    for (int i = 0; i < kLetters; ++i) table[static_cast<std::size_t>(i)] = static_cast<char>('A' + i);
    rng.shuffle(table);
    outdated = table;
    bool any = false;
    for (auto& c : outdated) {
      if (rng.uniform() < spec.corruption_rate) {
        c = static_cast<char>('Q' + rng.below(10));
        any = true;
      }
    }
    if (!any) outdated[rng.below(kLetters)] = static_cast<char>('Q' + rng.below(10));
  }

  auto make = [&](int index) {
    Sample s;
    if (spec.kind == TaskKind::biased_arithmetic) {
      const int a = index / 100, b = index % 100;
      s.prompt = fmt::format("{}+{}=", a, b);
      s.chosen = std::to_string(a + b);
      s.rejected = digit_sum_without_carry(a, b);
      return s;
    }
    const std::string w = word_of(index);
    if (spec.kind == TaskKind::spurious_suffix) {
      s.prompt = w + "=";
      for (char c : w) s.chosen.push_back(static_cast<char>(c - 'a' + 'A'));
      s.rejected = s.chosen + kSuffixes[rng.below(kSuffixes.size())];
    } else {
      s.prompt = w + ":";
      for (char c : w) {
        s.chosen.push_back(table[static_cast<std::size_t>(c - 'a')]);
        s.rejected.push_back(outdated[static_cast<std::size_t>(c - 'a')]);
      }
    }
    return s;
  };

  const std::size_t pool_size = task_capacity(spec.kind);
  std::vector<int> pool(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) pool[i] = static_cast<int>(i);
  rng.shuffle(pool);

  if (spec.n_test >= pool_size) {
    throw CapacityError(fmt::format("{} has {} prompts; cannot hold out {} test prompts", to_string(spec.kind),
                                    pool_size, spec.n_test));
  }

  SyntheticTask task;
  task.test.task = to_string(spec.kind);
  if (spec.kind == TaskKind::spurious_suffix) {
    task.test.spurious_markers.assign(kSuffixes.begin(), kSuffixes.end());
  } else if (spec.kind == TaskKind::keyed_lookup) {
    for (char c = 'Q'; c <= 'Z'; ++c) task.test.spurious_markers.emplace_back(1, c);
  }
  for (std::size_t i = pool_size - spec.n_test; i < pool_size; ++i) {
    const Sample s = make(pool[i]);
    task.test.examples.push_back({vocab.tokenize(s.prompt), s.chosen});
  }

  for (std::size_t i = 0; i < pool_size - spec.n_test && task.train.size() < spec.n_train; ++i) {
    const Sample s = make(pool[i]);
    if (s.chosen == s.rejected) continue;
    PreferenceTriple t;
    t.prompt = vocab.tokenize(s.prompt);
    t.chosen = vocab.encode_response(s.chosen);
    t.rejected = vocab.encode_response(s.rejected);
    if (spec.kind == TaskKind::spurious_suffix) {
      std::vector<std::size_t> suffix;
      for (std::size_t j = s.chosen.size(); j < s.rejected.size(); ++j) suffix.push_back(j);
      t.truth_unaligned = std::move(suffix);
    } else if (spec.kind == TaskKind::keyed_lookup) {
      t.truth_unaligned = substitutions(t.chosen, t.rejected);
    }
    const bool noisy = rng.uniform() < spec.sft_noise;
    task.sft.push_back({t.prompt, noisy ? t.rejected : t.chosen});
    task.train.push_back(std::move(t));
  }
  if (task.train.size() < spec.n_train) {
    throw CapacityError(fmt::format("{} can supply only {} training triples disjoint from {} test prompts, {} requested",
                                    to_string(spec.kind), task.train.size(), spec.n_test, spec.n_train));
  }
  return task;
}

}  // namespace allo::data
