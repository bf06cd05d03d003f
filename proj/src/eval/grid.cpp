// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>
#include <fstream>
#include <map>

#include "allo/error.hpp"
#include "allo/eval.hpp"
#include "allo/pipeline.hpp"

namespace allo::eval {

std::vector<GridCell> ablation_cells() {
  return {
      {"default", {}},
      {"learn-no-tlr", {{"learn.token_reward", "false"}}},
      {"forget-no-tlr", {{"forget.token_reward", "false"}}},
      {"forget-no-mask", {{"forget.mask", "none"}}},
      {"learn-no-mask", {{"learn.mask", "none"}}},
      {"forget-last-k", {{"forget.mask", "last"}}},
      {"learn-last-k", {{"learn.mask", "last"}}},
      {"no-forget", {{"forget.enabled", "false"}}},
      {"no-learn", {{"learn.enabled", "false"}}},
  };
}

pipeline::RunConfig with_seed(const pipeline::RunConfig& cfg, std::uint64_t s) {
  pipeline::RunConfig out = cfg;
  out.seed = s;
  out.model.seed = cfg.model.seed + s;
  out.data.synthetic.seed = cfg.data.synthetic.seed + s;
  return out;
}

std::vector<GridRow> run_ablation_grid(const pipeline::RunConfig& base, const std::vector<GridCell>& cells,
                                       const std::vector<std::uint64_t>& seeds) {
  if (cells.empty() || seeds.empty()) throw ContractError("ablation grid needs at least one cell and one seed");
  base.validate();
  for (const auto& cell : cells) {
    pipeline::RunConfig c = base;
    for (const auto& [k, v] : cell.overrides) c.set(k, v);
    c.validate();
  }

  std::vector<GridRow> rows;
  const std::filesystem::path root = base.out_dir;
  for (std::uint64_t s : seeds) {
    pipeline::RunConfig seeded = with_seed(base, s);
    if (seeded.base_checkpoint.empty()) {
      pipeline::RunConfig sft = seeded;
      sft.forget.enabled = false;
      sft.learn.enabled = false;
      sft.out_dir = (root / fmt::format("sft-seed-{}", s)).string();
      const pipeline::RunResult r = pipeline::run_allo(sft);
      if (!r.manifest.ok) throw Error(fmt::format("shared SFT run for seed {} failed", s));
      seeded.base_checkpoint = (std::filesystem::path(sft.out_dir) / "ckpt-sft.bin").string();
    }
    for (const auto& cell : cells) {
      pipeline::RunConfig c = seeded;
      for (const auto& [k, v] : cell.overrides) c.set(k, v);
      c.out_dir = (root / cell.id / fmt::format("seed-{}", s)).string();
      GridRow row;
      row.cell_id = cell.id;
      row.seed = s;
      row.config_digest = c.digest();
      try {
        pipeline::RunResult r = pipeline::run_allo(c);
        if (!r.manifest.ok || !r.final_model) throw Error("run failed");
        if (!r.data.test) throw ContractError("grid cells need a test set");
        const EvalReport e = evaluate(*r.final_model, *r.data.test, c.eval.max_len);
        row.accuracy = e.accuracy;
        row.spurious_rate = e.spurious_rate;
        row.final_loss = r.metrics.empty() ? 0.0 : r.metrics.back().loss;
        row.status = "completed";
      } catch (const std::exception& ex) {
        row.status = "failed";
        row.error = ex.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_grid_csv(const std::filesystem::path& path, const std::vector<GridRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  out << "cell_id,config_digest,accuracy,final_loss\n";
  std::vector<std::string> order;
  std::map<std::string, std::tuple<std::string, double, double, std::size_t>> agg;
  for (const auto& r : rows) {
    auto [it, fresh] = agg.try_emplace(r.cell_id, r.config_digest, 0.0, 0.0, 0);
    if (fresh) order.push_back(r.cell_id);
    if (r.status != "completed") continue;
    std::get<1>(it->second) += r.accuracy;
    std::get<2>(it->second) += r.final_loss;
    std::get<3>(it->second) += 1;
  }
  for (const auto& id : order) {
    const auto& [digest, acc, loss, n] = agg.at(id);
    if (n == 0) {
      out << fmt::format("{},{},,\n", id, digest);
    } else {
      out << fmt::format("{},{},{:.17g},{:.17g}\n", id, digest, acc / static_cast<double>(n),
                         loss / static_cast<double>(n));
    }
  }
}

void write_grid_seed_csv(const std::filesystem::path& path, const std::vector<GridRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  out << "cell_id,config_digest,accuracy,final_loss\n";
  for (const auto& r : rows) {
    if (r.status == "completed") {
      out << fmt::format("{}@{},{},{:.17g},{:.17g}\n", r.cell_id, r.seed, r.config_digest, r.accuracy, r.final_loss);
    } else {
      out << fmt::format("{}@{},{},,\n", r.cell_id, r.seed, r.config_digest);
    }
  }
}

}  // namespace allo::eval
