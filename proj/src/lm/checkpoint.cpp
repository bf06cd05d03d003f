// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/checkpoint.hpp"

#include <charconv>
#include <fmt/format.h>

#include "allo/error.hpp"

namespace allo::lm {
namespace {

using Kind = CheckpointError::Kind;
constexpr const char* kConfigPrefix = "model.";

template <typename T>
T parse_field(const Container& c, const std::string& key) {
  const std::string& text = c.header_value(kConfigPrefix + key);
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: bad value '{}' for {}", text, key));
  }
  return value;
}

bool is_config_key(const std::string& key) { return key.rfind(kConfigPrefix, 0) == 0 || key == "kind"; }

}  // namespace

ModelConfig config_from_header(const Container& c) {
  ModelConfig config;
  config.vocab_size = parse_field<std::int64_t>(c, "vocab_size");
  config.context_len = parse_field<std::int64_t>(c, "context_len");
  config.n_layers = parse_field<std::int64_t>(c, "n_layers");
  config.n_heads = parse_field<std::int64_t>(c, "n_heads");
  config.d_model = parse_field<std::int64_t>(c, "d_model");
  config.seed = parse_field<std::uint64_t>(c, "seed");
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: {}", e.what()));
  }
  return config;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path, const Metadata& metadata) {
  Container c;
  c.payload = PayloadKind::f64;
  c.header.emplace_back("kind", "model");
  for (const auto& [k, v] : model.config().fields()) c.header.emplace_back(kConfigPrefix + k, v);
  for (const auto& entry : metadata) {
    if (is_config_key(entry.first)) throw ContractError(fmt::format("metadata key '{}' is reserved", entry.first));
    c.header.push_back(entry);
  }
  const auto& layout = model.layout();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto data = model.params()[i].data();
    c.entries.push_back({layout[i].name, layout[i].shape, std::vector<double>(data.begin(), data.end()), {}});
  }
  write_container(path, c);
}

Model load_checkpoint(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.payload != PayloadKind::f64 || c.header_value("kind") != "model") {
    throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: {} does not hold a model", path.string()));
  }
  ModelConfig config = config_from_header(c);
  const ParamLayout layout = param_layout(config);
  if (c.entries.size() != layout.size()) {
    throw CheckpointError(Kind::shape_mismatch, fmt::format("shape mismatch: {} holds {} tensors, config implies {}",
                                                            path.string(), c.entries.size(), layout.size()));
  }
  std::vector<Tensor> params;
  params.reserve(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    auto& e = c.entries[i];
    if (e.name != layout[i].name || e.shape != layout[i].shape) {
      throw CheckpointError(Kind::shape_mismatch,
                            fmt::format("shape mismatch: tensor {} is {}{}, expected {}{}", i, e.name,
                                        shape_string(e.shape), layout[i].name, shape_string(layout[i].shape)));
    }
    params.emplace_back(e.shape, std::move(e.values), true);
  }
  return Model(config, std::move(params));
}

Model load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Model model = load_checkpoint(path);
  const auto got = model.config().fields();
  const auto want = expected.fields();
  for (std::size_t i = 0; i < got.size(); ++i) {
    // The init seed does not change the architecture.
    if (got[i].first == "seed") continue;
    if (got[i].second != want[i].second) {
      throw CheckpointError(Kind::config_mismatch,
                            fmt::format("config mismatch: {} has model.{} = {}, expected {}", path.string(),
                                        got[i].first, got[i].second, want[i].second));
    }
  }
  return model;
}

Metadata read_checkpoint_metadata(const std::filesystem::path& path) {
  const Container c = read_container(path);
  Metadata out;
  for (const auto& entry : c.header) {
    if (!is_config_key(entry.first)) out.push_back(entry);
  }
  return out;
}

}  // namespace allo::lm
