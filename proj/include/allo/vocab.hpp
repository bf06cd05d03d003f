// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "allo/model.hpp"

namespace allo::data {

using lm::TokenId;
using lm::Tokens;

inline constexpr TokenId kEos = lm::kEosToken;
inline constexpr TokenId kPad = 1;

/// Character vocabulary: 0 = end-of-sequence, 1 = padding, 2 = '\n', and the
/// 95 printable ASCII characters 0x20..0x7E at 3..97.
class Vocabulary {
 public:
  static constexpr std::size_t kSize = 98;

  std::size_t size() const { return kSize; }

  /// Throws EncodingError with the byte offset of the first unit outside the
  /// alphabet.
  Tokens tokenize(std::string_view text) const;
  /// Throws VocabError for ids >= size() or reserved ids.
  std::string detokenize(const Tokens& tokens) const;
  /// Text up to the first end-of-sequence; padding and other reserved ids are
  /// dropped instead of raising. Used to read model output.
  std::string render(const Tokens& tokens) const;

  /// tokenize(text) followed by the end-of-sequence token.
  Tokens encode_response(std::string_view text) const;
};

}  // namespace allo::data
