// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/dataset.hpp"
#include "allo/error.hpp"

namespace allo::data {

PreferenceTriple synthesize_negative(const lm::Model& model, const Tokens& prompt, const Tokens& chosen,
                                     double temperature, std::uint64_t seed, std::size_t max_retries) {
  if (chosen.empty()) throw ContractError("synthesize_negative needs a nonempty chosen response");
  const auto context = static_cast<std::size_t>(model.config().context_len);
  if (prompt.size() >= context) throw LengthError("prompt leaves no room for a response");
  const std::size_t max_len = context - prompt.size();

  PreferenceTriple t{prompt, chosen, {}, std::nullopt, false};
  for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
    t.rejected = lm::sample(model, prompt, temperature, max_len, seed + attempt);
    if (t.rejected != chosen && !t.rejected.empty()) return t;
  }
  t.degenerate = true;
  return t;
}

}  // namespace allo::data
