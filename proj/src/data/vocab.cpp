// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/vocab.hpp"

#include <fmt/format.h>

#include "allo/error.hpp"

namespace allo::data {
namespace {

constexpr TokenId kNewline = 2;
constexpr TokenId kFirstPrintable = 3;

}  // namespace

Tokens Vocabulary::tokenize(std::string_view text) const {
  Tokens out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '\n') {
      out.push_back(kNewline);
    } else if (c >= 0x20 && c <= 0x7E) {
      out.push_back(kFirstPrintable + static_cast<TokenId>(c - 0x20));
    } else {
      throw EncodingError(fmt::format("byte 0x{:02x} at position {} is outside the vocabulary", c, i), i);
    }
  }
  return out;
}

std::string Vocabulary::detokenize(const Tokens& tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId t = tokens[i];
    if (t < 0 || static_cast<std::size_t>(t) >= kSize) {
      throw VocabError(fmt::format("token id {} at position {} is out of range [0, {})", t, i, kSize));
    }
    if (t < kNewline) throw VocabError(fmt::format("reserved token id {} at position {} has no text", t, i));
    out.push_back(t == kNewline ? '\n' : static_cast<char>(0x20 + (t - kFirstPrintable)));
  }
  return out;
}

std::string Vocabulary::render(const Tokens& tokens) const {
  std::string out;
  for (const TokenId t : tokens) {
    if (t == kEos) break;
    if (t < kNewline || static_cast<std::size_t>(t) >= kSize) continue;
    out.push_back(t == kNewline ? '\n' : static_cast<char>(0x20 + (t - kFirstPrintable)));
  }
  return out;
}

Tokens Vocabulary::encode_response(std::string_view text) const {
  Tokens out = tokenize(text);
  out.push_back(kEos);
  return out;
}

}  // namespace allo::data
