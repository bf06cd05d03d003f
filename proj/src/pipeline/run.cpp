// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <fmt/format.h>
#include <fstream>

#include "allo/checkpoint.hpp"
#include "allo/error.hpp"
#include "allo/pipeline.hpp"
#include "json.hpp"

namespace allo::pipeline {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

class MetricsWriter {
 public:
  explicit MetricsWriter(const fs::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw Error(fmt::format("cannot open {} for writing", path.string()));
    out_ << "step,stage,loss,masked_token_fraction,grad_norm,lr\n";
  }
  MetricsSink sink(std::vector<MetricRow>& rows) {
    return [this, &rows](const MetricRow& row) {
      MetricRow global = row;
      global.step = step_++;
      out_ << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", global.step, global.stage, global.loss,
                          global.masked_token_fraction, global.grad_norm, global.lr);
      out_.flush();
      rows.push_back(std::move(global));
    };
  }

 private:
  std::ofstream out_;
  std::size_t step_ = 0;
};

std::string mask_file(StageMask mode, double k) {
  return mode == StageMask::top ? fmt::format("mask-{}.bin", k) : fmt::format("mask-{}-{}.bin", to_string(mode), k);
}

}  // namespace

void write_metrics_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  out << "step,stage,loss,masked_token_fraction,grad_norm,lr\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.step, r.stage, r.loss, r.masked_token_fraction,
                       r.grad_norm, r.lr);
  }
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["config_digest"] = config_digest;
  j["dataset_hash"] = dataset_hash;
  j["ok"] = ok;
  j["config"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) j["config"][k] = v;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : stages) {
    nlohmann::ordered_json st{{"name", s.name},
                              {"status", s.status},
                              {"checkpoint", s.checkpoint},
                              {"entry_hash", s.entry_hash},
                              {"reference_hash", s.reference_hash},
                              {"steps", s.steps},
                              {"seconds", s.seconds}};
    if (!s.error.empty()) st["error"] = s.error;
    j["stages"].push_back(std::move(st));
  }
  j["skipped"] = skipped;
  j["artifacts"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : artifacts) j["artifacts"][k] = v;
  j["wall_clock_seconds"] = wall_clock_seconds;
  return j.dump(2);
}

RunResult run_allo(const RunConfig& cfg, const RunHooks& hooks) {
  const auto started = Clock::now();
  cfg.validate();
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);

  RunResult result;
  result.data = prepare_data(cfg);
  const auto& train = result.data.train;
  RunManifest& manifest = result.manifest;
  manifest.config_digest = cfg.digest();
  manifest.config = cfg.entries();
  manifest.dataset_hash = result.data.dataset_hash;

  MetricsWriter metrics(out / "metrics.csv");
  const MetricsSink sink = metrics.sink(result.metrics);
  const lm::Metadata meta = {{"config_digest", manifest.config_digest}, {"dataset_hash", manifest.dataset_hash}};

  auto seconds_since = [](Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
  };
  auto save = [&](const lm::Model& m, const std::string& stage) {
    const std::string name = fmt::format("ckpt-{}.bin", stage);
    lm::Metadata md = meta;
    md.emplace_back("stage", stage);
    lm::save_checkpoint(m, out / name, md);
    manifest.artifacts.emplace_back(fmt::format("checkpoint.{}", stage), name);
    return name;
  };

  // Runs one stage body, recording it; returns false when the stage failed.
  auto run_stage = [&](const std::string& name, const std::function<void(StageRecord&)>& body) {
    StageRecord rec;
    rec.name = name;
    const auto t0 = Clock::now();
    try {
      body(rec);
      rec.status = "completed";
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.error = e.what();
      manifest.ok = false;
    }
    rec.seconds = seconds_since(t0);
    manifest.stages.push_back(rec);
    return rec.status == "completed";
  };

  std::vector<std::string> pending;
  if (cfg.base_checkpoint.empty()) pending.push_back("sft");
  const bool need_locate = (cfg.forget.enabled && cfg.forget.mask != StageMask::none) ||
                           (cfg.learn.enabled && cfg.learn.mask != StageMask::none);
  if (need_locate) pending.push_back("locate");
  if (cfg.forget.enabled) pending.push_back("forget");
  if (cfg.learn.enabled) pending.push_back("learn");
  auto skip_rest = [&](std::size_t from) {
    for (std::size_t i = from; i < pending.size(); ++i) manifest.skipped.push_back(pending[i]);
  };

  std::optional<lm::Model> model;
  if (!cfg.base_checkpoint.empty()) {
    model = lm::load_checkpoint(cfg.base_checkpoint, cfg.model);
    manifest.artifacts.emplace_back("base_checkpoint", cfg.base_checkpoint);
  }

  LocateResult located;
  for (std::size_t idx = 0; idx < pending.size(); ++idx) {
    const std::string& stage = pending[idx];
    bool ok = true;
    if (stage == "sft") {
      ok = run_stage("sft", [&](StageRecord& rec) {
        model = sft_fit(cfg.model, result.data.sft, cfg.sft, cfg.seed + 1, sink);
        rec.checkpoint = save(*model, "sft");
        rec.entry_hash = hex(lm::Model::init(cfg.model).hash());
        rec.steps = ((result.data.sft.size() + cfg.sft.batch - 1) / cfg.sft.batch) * cfg.sft.epochs;
      });
    } else if (stage == "locate") {
      ok = run_stage("locate", [&](StageRecord& rec) {
        rec.entry_hash = hex(model->hash());
        located = run_locate(*model, train, cfg.stage1, cfg.seed + 2, sink);
        rec.reference_hash = hex(located.reference_hash);
        rec.steps = located.warmup_losses.size();
        atlas::save_importance(located.importance, out / "importance.bin");
        manifest.artifacts.emplace_back("importance", "importance.bin");
        atlas::save_mask(located.n1, out / mask_file(StageMask::top, cfg.stage1.k1));
        atlas::save_mask(located.n2, out / mask_file(StageMask::top, cfg.stage1.k2));
        manifest.artifacts.emplace_back("mask.n1", mask_file(StageMask::top, cfg.stage1.k1));
        manifest.artifacts.emplace_back("mask.n2", mask_file(StageMask::top, cfg.stage1.k2));
      });
    } else {
      const bool forget = stage == "forget";
      const StageMask mode = forget ? cfg.forget.mask : cfg.learn.mask;
      const double k = forget ? cfg.stage1.k1 : cfg.stage1.k2;
      ok = run_stage(stage, [&](StageRecord& rec) {
        atlas::NeuronMask mask = mode == StageMask::top   ? (forget ? located.n1 : located.n2)
                                 : mode == StageMask::none ? atlas::full_mask(model->layout())
                                                           : stage_mask(located.importance, mode, k, cfg.stage1,
                                                                        cfg.seed + 5);
        if (mode == StageMask::last || mode == StageMask::random) {
          atlas::save_mask(mask, out / mask_file(mode, k));
          manifest.artifacts.emplace_back(fmt::format("mask.{}", stage), mask_file(mode, k));
        }
        StageReport report;
        try {
          if (forget) {
            std::vector<reward::TokenWeights> r;
            if (cfg.forget.token_reward) {
              if (cfg.forget.scorer == "model") {
                const auto scorer =
                    reward::ModelScorer::from_checkpoint(cfg.forget.scorer_checkpoint, cfg.forget.scorer_template);
                r = score_dataset(scorer, train, cfg.forget.u, out / "r-cache.jsonl");
              } else {
                r = score_dataset(reward::OracleDiffScorer{}, train, cfg.forget.u, out / "r-cache.jsonl");
              }
            }
            report = run_forget(*model, mask, train, r, cfg.forget, cfg.seed + 3, sink);
          } else {
            report = run_learn(*model, mask, train, cfg.learn, cfg.seed + 4, sink, hooks.on_q);
          }
        } catch (...) {
          rec.checkpoint = save(*model, stage);
          throw;
        }
        rec.entry_hash = hex(report.entry_hash);
        rec.reference_hash = hex(report.reference_hash);
        rec.steps = report.steps;
        rec.checkpoint = save(*model, stage);
      });
    }
    if (!ok) {
      skip_rest(idx + 1);
      break;
    }
  }

  if (manifest.ok && model) result.final_model = model;
  manifest.artifacts.emplace_back("metrics", "metrics.csv");
  manifest.wall_clock_seconds = seconds_since(started);
  std::ofstream(out / "manifest.json", std::ios::trunc) << manifest.to_json() << '\n';
  return result;
}

}  // namespace allo::pipeline
