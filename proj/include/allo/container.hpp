// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary tensor container shared by checkpoints, importance maps and masks.
//
//   u32  format version
//   u32  header length, then that many bytes of "key=value\n" text
//   u32  tensor count
//   per tensor:
//     u32 name length, name bytes
//     u32 rank, rank x u64 dims
//     payload=f64:  product(dims) x f64
//     payload=bits: u64 bit count, then ceil(count / 8) bytes, LSB first
//
// All integers and floats are little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "allo/tensor.hpp"

namespace allo::lm {

inline constexpr std::uint32_t kContainerVersion = 1;

enum class PayloadKind { f64, bits };

struct ContainerEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;       // payload f64
  std::vector<std::uint8_t> bits;   // payload bits, one byte (0/1) per element
};

struct Container {
  std::vector<std::pair<std::string, std::string>> header;
  PayloadKind payload = PayloadKind::f64;
  std::vector<ContainerEntry> entries;

  /// Value of a header key; throws CheckpointError(corrupted) when absent.
  const std::string& header_value(const std::string& key) const;
};

void write_container(const std::filesystem::path& path, const Container& container);
/// Throws CheckpointError: io when unreadable, version_mismatch, or corrupted
/// for truncation, trailing bytes and malformed headers.
Container read_container(const std::filesystem::path& path);

}  // namespace allo::lm
