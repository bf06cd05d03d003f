// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fstream>
#include <iostream>

#include "allo/checkpoint.hpp"
#include "allo/error.hpp"
#include "allo/eval.hpp"
#include "allo/pipeline.hpp"
#include "json.hpp"

namespace allo::cli {
namespace {

namespace fs = std::filesystem;
using pipeline::RunConfig;

struct Options {
  std::string config_path;
  std::string preset;
  std::vector<std::string> overrides;
  std::string out;
  std::string checkpoint;
  std::string base;
  std::string reference;
  std::string importance;
  std::string mask;
  std::string curves;
  std::string seeds = "0";
  double ratio = 0.0;
  std::string mode = "top";
};

RunConfig resolve(const Options& o) {
  RunConfig cfg = o.preset.empty() ? RunConfig{} : pipeline::preset(o.preset);
  if (!o.config_path.empty()) cfg = RunConfig::load(o.config_path, cfg);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("--set expects section.key=value, got '{}'", kv));
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

lm::Model base_model(const Options& o, const RunConfig& cfg) {
  const std::string path = !o.checkpoint.empty() ? o.checkpoint : cfg.base_checkpoint;
  if (path.empty()) throw ConfigError("no input model: pass --checkpoint or set model.base_checkpoint");
  return lm::load_checkpoint(path, cfg.model);
}

std::string required(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(fmt::format("{} is required for this command", flag));
  return value;
}

lm::Metadata metadata(const RunConfig& cfg, const std::string& stage) {
  return {{"config_digest", cfg.digest()}, {"stage", stage}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  out << text;
}

int cmd_gen_data(const Options& o) {
  const RunConfig cfg = resolve(o);
  const auto data = pipeline::prepare_data(cfg);
  const fs::path out = out_dir(cfg);
  const data::Vocabulary vocab;
  data::write_jsonl(out / "train.jsonl", data.train, vocab);
  data::write_sft_jsonl(out / "sft.jsonl", data.sft, vocab);
  if (data.test) data::write_test_jsonl(out / "test.jsonl", *data.test, vocab);
  return 0;
}

int cmd_sft(const Options& o) {
  const RunConfig cfg = resolve(o);
  const auto data = pipeline::prepare_data(cfg);
  const fs::path out = out_dir(cfg);
  std::vector<pipeline::MetricRow> rows;
  const lm::Model model = pipeline::sft_fit(cfg.model, data.sft, cfg.sft, cfg.seed + 1,
                                            [&](const pipeline::MetricRow& r) { rows.push_back(r); });
  lm::save_checkpoint(model, out / "ckpt-sft.bin", metadata(cfg, "sft"));
  pipeline::write_metrics_csv(out / "metrics.csv", rows);
  return 0;
}

int cmd_warmup(const Options& o) {
  const RunConfig cfg = resolve(o);
  const lm::Model base = base_model(o, cfg);
  const auto data = pipeline::prepare_data(cfg);
  const fs::path out = out_dir(cfg);
  atlas::WarmupConfig warm{cfg.stage1.method, cfg.stage1.optimizer, cfg.stage1.batch, cfg.stage1.beta, true,
                           cfg.seed + 2};
  const atlas::WarmupResult w = atlas::train_reference(base, data.train, warm);
  lm::Metadata md = metadata(cfg, "warmup");
  md.emplace_back("alpha", fmt::format("{:.17g}", w.alpha));
  md.emplace_back("method", atlas::to_string(w.method));
  lm::save_checkpoint(w.reference, out / "ckpt-warmup.bin", md);
  return 0;
}

int cmd_importance(const Options& o) {
  const RunConfig cfg = resolve(o);
  const lm::Model base = lm::load_checkpoint(required(o.base, "--base"), cfg.model);
  const lm::Model reference = lm::load_checkpoint(required(o.reference, "--reference"), cfg.model);
  atlas::ImportanceMap map = atlas::estimate_importance(base, reference, cfg.stage1.optimizer.learning_rate);
  map.method = cfg.stage1.method;
  atlas::save_importance(map, out_dir(cfg) / "importance.bin");
  return 0;
}

int cmd_mask(const Options& o) {
  const RunConfig cfg = resolve(o);
  const atlas::ImportanceMap map = atlas::load_importance(required(o.importance, "--importance"));
  const double k = o.ratio > 0.0 ? o.ratio : cfg.stage1.k1;
  if (!(k > 0.0 && k <= 100.0)) throw ConfigError(fmt::format("--ratio must be in (0, 100], got {}", k));
  const pipeline::StageMask mode = pipeline::parse_stage_mask(o.mode);
  const atlas::NeuronMask mask = pipeline::stage_mask(map, mode, k, cfg.stage1, cfg.seed + 5);
  const fs::path out = out_dir(cfg);
  const std::string stem = mode == pipeline::StageMask::top ? fmt::format("mask-{}", k)
                                                            : fmt::format("mask-{}-{}", o.mode, k);
  atlas::save_mask(mask, out / (stem + ".bin"));
  write_text(out / (stem + ".json"), atlas::mask_report(mask, map.layout).to_json() + "\n");
  return 0;
}

atlas::NeuronMask stage_mask_input(const Options& o, const lm::Model& model) {
  if (o.mask.empty()) return atlas::full_mask(model.layout());
  atlas::NeuronMask mask = atlas::load_mask(o.mask);
  if (mask.layout != model.layout()) throw ConfigError(fmt::format("mask {} does not match the model", o.mask));
  return mask;
}

int cmd_forget(const Options& o) {
  const RunConfig cfg = resolve(o);
  lm::Model model = base_model(o, cfg);
  const atlas::NeuronMask mask = stage_mask_input(o, model);
  const auto data = pipeline::prepare_data(cfg);
  const fs::path out = out_dir(cfg);
  std::vector<reward::TokenWeights> r;
  if (cfg.forget.token_reward) {
    if (cfg.forget.scorer == "model") {
      const auto scorer = reward::ModelScorer::from_checkpoint(cfg.forget.scorer_checkpoint, cfg.forget.scorer_template);
      r = pipeline::score_dataset(scorer, data.train, cfg.forget.u, out / "r-cache.jsonl");
    } else {
      r = pipeline::score_dataset(reward::OracleDiffScorer{}, data.train, cfg.forget.u, out / "r-cache.jsonl");
    }
  }
  std::vector<pipeline::MetricRow> rows;
  pipeline::run_forget(model, mask, data.train, r, cfg.forget, cfg.seed + 3,
                       [&](const pipeline::MetricRow& row) { rows.push_back(row); });
  lm::save_checkpoint(model, out / "ckpt-forget.bin", metadata(cfg, "forget"));
  pipeline::write_metrics_csv(out / "metrics.csv", rows);
  return 0;
}

int cmd_learn(const Options& o) {
  const RunConfig cfg = resolve(o);
  lm::Model model = base_model(o, cfg);
  const atlas::NeuronMask mask = stage_mask_input(o, model);
  const auto data = pipeline::prepare_data(cfg);
  const fs::path out = out_dir(cfg);
  std::vector<pipeline::MetricRow> rows;
  pipeline::run_learn(model, mask, data.train, cfg.learn, cfg.seed + 4,
                      [&](const pipeline::MetricRow& row) { rows.push_back(row); });
  lm::save_checkpoint(model, out / "ckpt-learn.bin", metadata(cfg, "learn"));
  pipeline::write_metrics_csv(out / "metrics.csv", rows);
  return 0;
}

int cmd_run_allo(const Options& o) {
  const RunConfig cfg = resolve(o);
  const pipeline::RunResult r = pipeline::run_allo(cfg);
  if (!r.manifest.ok) {
    for (const auto& s : r.manifest.stages) {
      if (s.status == "failed") std::cerr << fmt::format("stage {} failed: {}\n", s.name, s.error);
    }
    return 2;
  }
  return 0;
}

int cmd_eval(const Options& o) {
  const RunConfig cfg = resolve(o);
  const lm::Model model = lm::load_checkpoint(required(o.checkpoint, "--checkpoint"), cfg.model);
  const auto data = pipeline::prepare_data(cfg);
  if (!data.test) throw ConfigError("no test set: set data.test_path or use a synthetic task");
  const eval::EvalReport report = eval::evaluate(model, *data.test, cfg.eval.max_len);
  const fs::path out = out_dir(cfg);
  eval::write_eval_csv(out / "eval.csv", {report});
  std::ofstream records(out / "eval-records.jsonl", std::ios::trunc);
  for (const auto& rec : report.records) {
    records << nlohmann::json{{"prompt", rec.prompt},   {"output", rec.output},     {"gold", rec.gold},
                              {"correct", rec.correct}, {"spurious", rec.spurious}, {"overflow", rec.overflow}}
                   .dump()
            << '\n';
  }
  return 0;
}

int cmd_compare(const Options& o) {
  const RunConfig cfg = resolve(o);
  const auto curves = eval::read_curves_csv(required(o.curves, "--curves"));
  const auto rows = eval::compare_runs(curves, cfg.eval.loss_threshold);
  const fs::path out = out_dir(cfg);
  write_text(out / "comparison.csv", eval::comparison_csv(rows));
  write_text(out / "comparison.json", eval::comparison_json(rows) + "\n");
  return 0;
}

int cmd_ablate(const Options& o) {
  const RunConfig cfg = resolve(o);
  std::vector<std::uint64_t> seeds;
  std::string token;
  std::istringstream in(o.seeds);
  while (std::getline(in, token, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("--seeds expects comma-separated integers, got '{}'", o.seeds));
    }
  }
  const auto rows = eval::run_ablation_grid(cfg, eval::ablation_cells(), seeds);
  const fs::path out = out_dir(cfg);
  eval::write_grid_csv(out / "grid.csv", rows);
  eval::write_grid_seed_csv(out / "grid-seeds.csv", rows);
  bool ok = true;
  for (const auto& r : rows) {
    if (r.status != "completed") {
      std::cerr << fmt::format("cell {} seed {} failed: {}\n", r.cell_id, r.seed, r.error);
      ok = false;
    }
  }
  return ok ? 0 : 2;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Low-redundant preference optimization on tiny causal language models", "allo"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Run config file (section.key = value lines)");
    sub->add_option("--preset", o.preset, "Start from a preset: desk, paper-qa, paper-math, paper-alignment");
    sub->add_option("--set", o.overrides, "Override one key, section.key=value (repeatable)");
    sub->add_option("--out", o.out, "Output directory (overrides run.out_dir)");
  };

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"gen-data", "Write train/sft/test JSONL for the configured task", cmd_gen_data},
      {"sft", "Fit the SFT model on the SFT corpus", cmd_sft},
      {"warmup", "One-epoch warm-up of the base model", cmd_warmup},
      {"importance", "Importance map from base and warmed-up checkpoints", cmd_importance},
      {"mask", "Neuron mask from an importance map", cmd_mask},
      {"forget", "Masked token-level NPO stage", cmd_forget},
      {"learn", "Masked token-level DPO stage", cmd_learn},
      {"run-allo", "Full pipeline: sft, locate, forget, learn", cmd_run_allo},
      {"eval", "Exact-match evaluation of a checkpoint", cmd_eval},
      {"compare", "Summarize loss curves", cmd_compare},
      {"ablate", "Run the ablation grid", cmd_ablate},
  };
  int (*selected)(const Options&) = nullptr;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    common(sub);
    const std::string name = c.name;
    if (name == "warmup" || name == "forget" || name == "learn" || name == "eval") {
      sub->add_option("--checkpoint", o.checkpoint, "Input model checkpoint");
    }
    if (name == "importance") {
      sub->add_option("--base", o.base, "Base checkpoint");
      sub->add_option("--reference", o.reference, "Warmed-up checkpoint");
    }
    if (name == "mask") {
      sub->add_option("--importance", o.importance, "Importance map file");
      sub->add_option("--ratio", o.ratio, "Selected percentage (default stage1.k1)");
      sub->add_option("--mode", o.mode, "top, last, random or none");
    }
    if (name == "forget" || name == "learn") sub->add_option("--mask", o.mask, "Neuron mask file (default: all)");
    if (name == "compare") sub->add_option("--curves", o.curves, "CSV with run,step,loss");
    if (name == "ablate") sub->add_option("--seeds", o.seeds, "Comma-separated seed list");
    auto run = c.run;
    sub->callback([&selected, run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cerr << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    return selected(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace allo::cli
