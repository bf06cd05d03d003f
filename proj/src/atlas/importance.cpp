// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fmt/format.h>

#include "allo/atlas.hpp"
#include "allo/container.hpp"
#include "allo/error.hpp"

namespace allo::atlas {

ImportanceMap estimate_importance(const lm::Model& base, const lm::Model& reference, double alpha) {
  if (!(alpha > 0.0)) throw ContractError(fmt::format("importance needs alpha > 0, got {}", alpha));
  if (base.layout() != reference.layout()) throw ContractError("importance: base and reference layouts differ");

  ImportanceMap map{base.layout(), {}, alpha, WarmupMethod::dpo};
  map.scores.resize(map.layout.size());
  for (std::size_t t = 0; t < map.layout.size(); ++t) {
    const auto a = base.params()[t].data();
    const auto b = reference.params()[t].data();
    auto& s = map.scores[t];
    s.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) s[i] = std::abs(b[i] - a[i]) / alpha;
  }
  return map;
}

void save_importance(const ImportanceMap& importance, const std::filesystem::path& path) {
  lm::Container c;
  c.payload = lm::PayloadKind::f64;
  c.header = {{"kind", "importance"},
              {"alpha", fmt::format("{:.17g}", importance.alpha)},
              {"method", to_string(importance.method)},
              {"delta_sign", "reference-minus-base"}};
  for (std::size_t t = 0; t < importance.layout.size(); ++t) {
    c.entries.push_back({importance.layout[t].name, importance.layout[t].shape, importance.scores[t], {}});
  }
  lm::write_container(path, c);
}

ImportanceMap load_importance(const std::filesystem::path& path) {
  lm::Container c = lm::read_container(path);
  using Kind = CheckpointError::Kind;
  if (c.payload != lm::PayloadKind::f64 || c.header_value("kind") != "importance") {
    throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: {} is not an importance map", path.string()));
  }
  ImportanceMap map;
  try {
    map.alpha = std::stod(c.header_value("alpha"));
    map.method = parse_warmup_method(c.header_value("method"));
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: bad importance header: {}", e.what()));
  }
  for (auto& e : c.entries) {
    for (double v : e.values) {
      if (!std::isfinite(v) || v < 0.0) {
        throw CheckpointError(Kind::corrupted, fmt::format("corrupted checkpoint: invalid score in {}", e.name));
      }
    }
    map.layout.push_back({e.name, e.shape});
    map.scores.push_back(std::move(e.values));
  }
  return map;
}

}  // namespace allo::atlas
