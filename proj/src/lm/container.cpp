// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/container.hpp"

#include <bit>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <iterator>
#include <sstream>

#include "allo/error.hpp"

namespace allo::lm {
namespace {

using Kind = CheckpointError::Kind;

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  const std::string& buffer() const { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string buf) : buf_(std::move(buf)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) {
      throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: truncated at byte {}", pos_));
    }
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace

const std::string& Container::header_value(const std::string& key) const {
  for (const auto& [k, v] : header) {
    if (k == key) return v;
  }
  throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: header lacks key '{}'", key));
}

void write_container(const std::filesystem::path& path, const Container& container) {
  Writer w;
  w.u32(kContainerVersion);
  std::string header = fmt::format("payload={}\n", container.payload == PayloadKind::f64 ? "f64" : "bits");
  for (const auto& [k, v] : container.header) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ContractError(fmt::format("container header entry '{}' contains a reserved character", k));
    }
    header += k + "=" + v + "\n";
  }
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.bytes(header.data(), header.size());
  w.u32(static_cast<std::uint32_t>(container.entries.size()));
  for (const auto& e : container.entries) {
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) w.u64(d);
    const std::size_t n = shape_size(e.shape);
    if (container.payload == PayloadKind::f64) {
      if (e.values.size() != n) throw ContractError(fmt::format("container entry {} has wrong value count", e.name));
      for (double v : e.values) w.f64(v);
    } else {
      if (e.bits.size() != n) throw ContractError(fmt::format("container entry {} has wrong bit count", e.name));
      w.u64(n);
      std::string packed((n + 7) / 8, '\0');
      for (std::size_t i = 0; i < n; ++i) {
        if (e.bits[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
      }
      w.bytes(packed.data(), packed.size());
    }
  }

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(Kind::io, fmt::format("cannot open {} for writing", tmp.string()));
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw CheckpointError(Kind::io, fmt::format("write to {} failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::io, fmt::format("cannot open checkpoint {}", path.string()));
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));

  const std::uint32_t version = r.u32();
  if (version != kContainerVersion) {
    throw CheckpointError(Kind::version_mismatch, fmt::format("checkpoint {} has format version {}, expected {}",
                                                              path.string(), version, kContainerVersion));
  }
  Container c;
  std::istringstream header(r.bytes(r.u32()));
  std::string line;
  bool payload_seen = false;
  while (std::getline(header, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: bad header line '{}'", line));
    }
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "payload") {
      if (value != "f64" && value != "bits") {
        throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: unknown payload '{}'", value));
      }
      c.payload = value == "f64" ? PayloadKind::f64 : PayloadKind::bits;
      payload_seen = true;
    } else {
      c.header.emplace_back(std::move(key), std::move(value));
    }
  }
  if (!payload_seen) throw CheckpointError(Kind::corrupted, "corrupted checkpoint: header lacks payload kind");

  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    ContainerEntry e;
    e.name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: rank {}", rank));
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      e.shape.push_back(r.u64());
      n *= e.shape.back();
    }
    if (c.payload == PayloadKind::f64) {
      if (n > r.remaining() / 8) throw CheckpointError(Kind::corrupted, "corrupted checkpoint: truncated payload");
      e.values.resize(n);
      for (double& v : e.values) v = r.f64();
    } else {
      const std::uint64_t bits = r.u64();
      if (bits != n) {
        throw CheckpointError(Kind::corrupted,
                              fmt::format("corrupted checkpoint: {} bits for {} elements in {}", bits, n, e.name));
      }
      const std::string packed = r.bytes((n + 7) / 8);
      e.bits.resize(n);
      for (std::size_t i = 0; i < n; ++i) e.bits[i] = (static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1;
    }
    c.entries.push_back(std::move(e));
  }
  if (!r.at_end()) throw CheckpointError(Kind::corrupted, "corrupted checkpoint: trailing bytes after last tensor");
  return c;
}

}  // namespace allo::lm
