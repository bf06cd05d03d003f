// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "allo/atlas.hpp"
#include "allo/container.hpp"
#include "allo/error.hpp"
#include "allo/random.hpp"
#include "json.hpp"

namespace allo::atlas {
namespace {

// Picks `count` of `candidates` (ascending flat indices) by the mode's rule.
std::vector<std::size_t> select(std::vector<std::size_t> candidates, std::size_t count,
                                const std::vector<double>& flat_scores, MaskMode mode, Rng& rng) {
  if (mode == MaskMode::random) {
    rng.shuffle(candidates);
  } else {
    auto better = [&](std::size_t a, std::size_t b) {
      const double sa = flat_scores[a], sb = flat_scores[b];
      if (sa != sb) return mode == MaskMode::top ? sa > sb : sa < sb;
      return a < b;
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count), candidates.end(),
                      better);
  }
  candidates.resize(count);
  return candidates;
}

std::string group_of(const std::string& name) {
  const auto dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

}  // namespace

std::string to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::top: return "top";
    case MaskMode::last: return "last";
    case MaskMode::random: return "random";
  }
  return "?";
}

std::string to_string(MaskScope scope) { return scope == MaskScope::global ? "global" : "per-tensor"; }

MaskMode parse_mask_mode(const std::string& text) {
  for (MaskMode m : {MaskMode::top, MaskMode::last, MaskMode::random}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError(fmt::format("unknown mask mode '{}' (expected top, last or random)", text));
}

MaskScope parse_mask_scope(const std::string& text) {
  if (text == "global") return MaskScope::global;
  if (text == "per-tensor") return MaskScope::per_tensor;
  throw ConfigError(fmt::format("unknown mask scope '{}' (expected global or per-tensor)", text));
}

std::size_t NeuronMask::popcount() const {
  std::size_t n = 0;
  for (const auto& b : bits) n += static_cast<std::size_t>(std::count(b.begin(), b.end(), std::uint8_t{1}));
  return n;
}

NeuronMask build_mask(const ImportanceMap& importance, const MaskSpec& spec) {
  if (!(spec.ratio > 0.0 && spec.ratio <= 1.0)) {
    throw ContractError(fmt::format("mask ratio must be in (0, 1], got {}", spec.ratio));
  }
  if (importance.scores.size() != importance.layout.size()) throw ContractError("importance map layout mismatch");

  std::vector<double> flat;
  std::vector<std::size_t> offsets;
  for (std::size_t t = 0; t < importance.layout.size(); ++t) {
    if (importance.scores[t].size() != shape_size(importance.layout[t].shape)) {
      throw ContractError(fmt::format("importance tensor {} has the wrong size", importance.layout[t].name));
    }
    offsets.push_back(flat.size());
    flat.insert(flat.end(), importance.scores[t].begin(), importance.scores[t].end());
  }

  NeuronMask mask{importance.layout, {}, spec};
  mask.bits.resize(importance.layout.size());
  for (std::size_t t = 0; t < importance.layout.size(); ++t) mask.bits[t].assign(importance.scores[t].size(), 0);

  auto eligible = [&](std::size_t t) {
    return spec.include_embeddings_and_norms || !lm::is_embedding_or_norm(importance.layout[t].name);
  };
  auto mark = [&](const std::vector<std::size_t>& chosen) {
    for (std::size_t flat_index : chosen) {
      const auto t = static_cast<std::size_t>(
          std::upper_bound(offsets.begin(), offsets.end(), flat_index) - offsets.begin() - 1);
      mask.bits[t][flat_index - offsets[t]] = 1;
    }
  };

  Rng rng(spec.seed);
  if (spec.scope == MaskScope::global) {
    std::vector<std::size_t> candidates;
    for (std::size_t t = 0; t < importance.layout.size(); ++t) {
      if (!eligible(t)) continue;
      for (std::size_t i = 0; i < importance.scores[t].size(); ++i) candidates.push_back(offsets[t] + i);
    }
    const auto count = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(candidates.size())));
    mark(select(std::move(candidates), count, flat, spec.mode, rng));
  } else {
    for (std::size_t t = 0; t < importance.layout.size(); ++t) {
      if (!eligible(t)) continue;
      std::vector<std::size_t> candidates(importance.scores[t].size());
      std::iota(candidates.begin(), candidates.end(), offsets[t]);
      const auto count = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(candidates.size())));
      mark(select(std::move(candidates), count, flat, spec.mode, rng));
    }
  }
  return mask;
}

NeuronMask full_mask(const lm::ParamLayout& layout) {
  NeuronMask mask{layout, {}, MaskSpec{1.0, MaskMode::top, MaskScope::global, 0, true}};
  for (const auto& slot : layout) mask.bits.emplace_back(shape_size(slot.shape), 1);
  return mask;
}

void save_mask(const NeuronMask& mask, const std::filesystem::path& path) {
  lm::Container c;
  c.payload = lm::PayloadKind::bits;
  c.header = {{"kind", "mask"},
              {"ratio", fmt::format("{:.17g}", mask.spec.ratio)},
              {"mode", to_string(mask.spec.mode)},
              {"scope", to_string(mask.spec.scope)},
              {"seed", std::to_string(mask.spec.seed)},
              {"include_embeddings_and_norms", mask.spec.include_embeddings_and_norms ? "true" : "false"}};
  for (std::size_t t = 0; t < mask.layout.size(); ++t) {
    c.entries.push_back({mask.layout[t].name, mask.layout[t].shape, {}, mask.bits[t]});
  }
  lm::write_container(path, c);
}

NeuronMask load_mask(const std::filesystem::path& path) {
  lm::Container c = lm::read_container(path);
  using Kind = CheckpointError::Kind;
  if (c.payload != lm::PayloadKind::bits || c.header_value("kind") != "mask") {
    throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: {} is not a neuron mask", path.string()));
  }
  NeuronMask mask;
  try {
    mask.spec.ratio = std::stod(c.header_value("ratio"));
    mask.spec.mode = parse_mask_mode(c.header_value("mode"));
    mask.spec.scope = parse_mask_scope(c.header_value("scope"));
    mask.spec.seed = std::stoull(c.header_value("seed"));
    mask.spec.include_embeddings_and_norms = c.header_value("include_embeddings_and_norms") == "true";
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: bad mask header: {}", e.what()));
  }
  for (auto& e : c.entries) {
    mask.layout.push_back({e.name, e.shape});
    mask.bits.push_back(std::move(e.bits));
  }
  return mask;
}

MaskReport mask_report(const NeuronMask& mask, const lm::Model& model) { return mask_report(mask, model.layout()); }

MaskReport mask_report(const NeuronMask& mask, const lm::ParamLayout& layout) {
  if (mask.layout != layout || mask.bits.size() != mask.layout.size()) {
    throw ContractError("mask layout does not match the model");
  }
  MaskReport report;
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> groups;
  for (std::size_t t = 0; t < mask.layout.size(); ++t) {
    if (mask.bits[t].size() != shape_size(layout[t].shape)) {
      throw ContractError(fmt::format("mask tensor {} has the wrong size", layout[t].name));
    }
    TensorCount tc{mask.layout[t].name, mask.bits[t].size(),
                   static_cast<std::size_t>(std::count(mask.bits[t].begin(), mask.bits[t].end(), std::uint8_t{1}))};
    report.popcount += tc.selected;
    report.total += tc.size;
    const std::string g = group_of(tc.name);
    if (groups.empty() || groups.back().first != g) groups.push_back({g, {0, 0}});
    groups.back().second.first += tc.selected;
    groups.back().second.second += tc.size;
    report.tensors.push_back(std::move(tc));
  }
  for (const auto& [g, counts] : groups) {
    report.group_fractions.emplace_back(g, static_cast<double>(counts.first) / static_cast<double>(counts.second));
  }
  return report;
}

std::string MaskReport::to_json() const {
  nlohmann::ordered_json j;
  j["popcount"] = popcount;
  j["total"] = total;
  j["fraction"] = total ? static_cast<double>(popcount) / static_cast<double>(total) : 0.0;
  j["tensors"] = nlohmann::ordered_json::array();
  for (const auto& t : tensors) j["tensors"].push_back({{"name", t.name}, {"size", t.size}, {"selected", t.selected}});
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& [g, f] : group_fractions) j["groups"].push_back({{"group", g}, {"fraction", f}});
  return j.dump(2);
}

}  // namespace allo::atlas
