// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "allo/error.hpp"
#include "allo/vocab.hpp"

namespace allo::pipeline {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_int(const std::string& key, const std::string& text) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid integer", key, text));
  }
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, text));
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "on" || text == "1") return true;
  if (text == "false" || text == "off" || text == "0") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean (true/false/on/off)", key, text));
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define ALLO_INT_FIELD(KEY, MEMBER, TYPE)                                            \
  Field {                                                                            \
    KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },               \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_int<TYPE>(KEY, v); } \
  }
#define ALLO_REAL_FIELD(KEY, MEMBER)                                              \
  Field {                                                                         \
    KEY, [](const RunConfig& c) { return fmt::format("{}", c.MEMBER); },         \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_double(KEY, v); } \
  }
#define ALLO_BOOL_FIELD(KEY, MEMBER)                                            \
  Field {                                                                       \
    KEY, [](const RunConfig& c) { return fmt_bool(c.MEMBER); },                 \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); } \
  }
#define ALLO_TEXT_FIELD(KEY, MEMBER)                             \
  Field {                                                        \
    KEY, [](const RunConfig& c) { return c.MEMBER; },            \
        [](RunConfig& c, const std::string& v) { c.MEMBER = v; } \
  }
#define ALLO_ENUM_FIELD(KEY, MEMBER, PARSE)                          \
  Field {                                                            \
    KEY, [](const RunConfig& c) { return to_string(c.MEMBER); },     \
        [](RunConfig& c, const std::string& v) { c.MEMBER = PARSE(v); } \
  }

using atlas::to_string;
using data::to_string;
using allo::to_string;

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      ALLO_INT_FIELD("model.vocab_size", model.vocab_size, std::int64_t),
      ALLO_INT_FIELD("model.context_len", model.context_len, std::int64_t),
      ALLO_INT_FIELD("model.n_layers", model.n_layers, std::int64_t),
      ALLO_INT_FIELD("model.n_heads", model.n_heads, std::int64_t),
      ALLO_INT_FIELD("model.d_model", model.d_model, std::int64_t),
      ALLO_INT_FIELD("model.seed", model.seed, std::uint64_t),
      ALLO_TEXT_FIELD("model.base_checkpoint", base_checkpoint),

      ALLO_ENUM_FIELD("data.task", data.synthetic.kind, data::parse_task_kind),
      ALLO_INT_FIELD("data.n_train", data.synthetic.n_train, std::size_t),
      ALLO_INT_FIELD("data.n_test", data.synthetic.n_test, std::size_t),
      ALLO_REAL_FIELD("data.corruption_rate", data.synthetic.corruption_rate),
      ALLO_REAL_FIELD("data.sft_noise", data.synthetic.sft_noise),
      ALLO_INT_FIELD("data.seed", data.synthetic.seed, std::uint64_t),
      ALLO_TEXT_FIELD("data.train_path", data.train_path),
      ALLO_TEXT_FIELD("data.test_path", data.test_path),
      ALLO_TEXT_FIELD("data.sft_path", data.sft_path),

      ALLO_INT_FIELD("sft.epochs", sft.epochs, std::size_t),
      ALLO_ENUM_FIELD("sft.optimizer", sft.optimizer.kind, parse_optimizer_kind),
      ALLO_REAL_FIELD("sft.lr", sft.optimizer.learning_rate),
      ALLO_INT_FIELD("sft.batch", sft.batch, std::size_t),

      ALLO_ENUM_FIELD("stage1.method", stage1.method, atlas::parse_warmup_method),
      ALLO_ENUM_FIELD("stage1.optimizer", stage1.optimizer.kind, parse_optimizer_kind),
      ALLO_REAL_FIELD("stage1.lr", stage1.optimizer.learning_rate),
      ALLO_INT_FIELD("stage1.batch", stage1.batch, std::size_t),
      ALLO_REAL_FIELD("stage1.beta", stage1.beta),
      ALLO_REAL_FIELD("stage1.k1", stage1.k1),
      ALLO_REAL_FIELD("stage1.k2", stage1.k2),
      ALLO_ENUM_FIELD("stage1.scope", stage1.scope, atlas::parse_mask_scope),
      ALLO_BOOL_FIELD("stage1.include_embeddings_and_norms", stage1.include_embeddings_and_norms),

      ALLO_BOOL_FIELD("forget.enabled", forget.enabled),
      ALLO_ENUM_FIELD("forget.optimizer", forget.optimizer.kind, parse_optimizer_kind),
      ALLO_REAL_FIELD("forget.lr", forget.optimizer.learning_rate),
      ALLO_INT_FIELD("forget.batch", forget.batch, std::size_t),
      ALLO_INT_FIELD("forget.epochs", forget.epochs, std::size_t),
      ALLO_REAL_FIELD("forget.beta", forget.beta),
      ALLO_REAL_FIELD("forget.u", forget.u),
      ALLO_BOOL_FIELD("forget.token_reward", forget.token_reward),
      ALLO_ENUM_FIELD("forget.mask", forget.mask, parse_stage_mask),
      ALLO_TEXT_FIELD("forget.scorer", forget.scorer),
      ALLO_TEXT_FIELD("forget.scorer_checkpoint", forget.scorer_checkpoint),
      ALLO_TEXT_FIELD("forget.scorer_template", forget.scorer_template),
      ALLO_BOOL_FIELD("forget.drop_masked_tokens", forget.drop_masked_tokens),

      ALLO_BOOL_FIELD("learn.enabled", learn.enabled),
      ALLO_ENUM_FIELD("learn.optimizer", learn.optimizer.kind, parse_optimizer_kind),
      ALLO_REAL_FIELD("learn.lr", learn.optimizer.learning_rate),
      ALLO_INT_FIELD("learn.batch", learn.batch, std::size_t),
      ALLO_INT_FIELD("learn.epochs", learn.epochs, std::size_t),
      ALLO_REAL_FIELD("learn.beta", learn.beta),
      ALLO_REAL_FIELD("learn.v", learn.v),
      ALLO_BOOL_FIELD("learn.token_reward", learn.token_reward),
      ALLO_ENUM_FIELD("learn.mask", learn.mask, parse_stage_mask),

      ALLO_REAL_FIELD("eval.loss_threshold", eval.loss_threshold),
      ALLO_INT_FIELD("eval.max_len", eval.max_len, std::size_t),

      ALLO_INT_FIELD("run.seed", seed, std::uint64_t),
      ALLO_TEXT_FIELD("run.out_dir", out_dir),
  };
  return table;
}

#undef ALLO_INT_FIELD
#undef ALLO_REAL_FIELD
#undef ALLO_BOOL_FIELD
#undef ALLO_TEXT_FIELD
#undef ALLO_ENUM_FIELD

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void check_optimizer(const char* section, const OptimizerConfig& o) {
  require(o.learning_rate > 0.0, fmt::format("{}.lr must be positive, got {}", section, o.learning_rate));
}

}  // namespace

std::string to_string(StageMask mask) {
  switch (mask) {
    case StageMask::top: return "top";
    case StageMask::last: return "last";
    case StageMask::random: return "random";
    case StageMask::none: return "none";
  }
  return "?";
}

StageMask parse_stage_mask(const std::string& text) {
  for (StageMask m : {StageMask::top, StageMask::last, StageMask::random, StageMask::none}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError(fmt::format("unknown mask '{}' (expected top, last, random or none)", text));
}

void RunConfig::validate() const {
  model.validate();
  require(model.vocab_size >= static_cast<std::int64_t>(data::Vocabulary::kSize),
          fmt::format("model.vocab_size must be >= {} to cover the character vocabulary, got {}",
                      data::Vocabulary::kSize, model.vocab_size));
  if (data.train_path.empty()) data.synthetic.validate();
  require(sft.epochs >= 1, "sft.epochs must be >= 1");
  require(sft.batch >= 1, "sft.batch must be >= 1");
  check_optimizer("sft", sft.optimizer);

  require(stage1.optimizer.learning_rate > 0.0,
          fmt::format("stage1.lr must be positive, got {}", stage1.optimizer.learning_rate));
  require(stage1.batch >= 1, "stage1.batch must be >= 1");
  require(stage1.beta > 0.0, fmt::format("stage1.beta must be positive, got {}", stage1.beta));
  require(stage1.k1 > 0.0 && stage1.k1 <= 100.0, fmt::format("stage1.k1 must be in (0, 100], got {}", stage1.k1));
  require(stage1.k2 > 0.0 && stage1.k2 <= 100.0, fmt::format("stage1.k2 must be in (0, 100], got {}", stage1.k2));

  check_optimizer("forget", forget.optimizer);
  require(forget.batch >= 1, "forget.batch must be >= 1");
  require(forget.epochs >= 1, "forget.epochs must be >= 1");
  require(forget.beta > 0.0, fmt::format("forget.beta must be positive, got {}", forget.beta));
  require(forget.u > 0.0 && forget.u < 1.0, fmt::format("forget.u must be in (0, 1), got {}", forget.u));
  require(forget.scorer == "oracle-diff" || forget.scorer == "model",
          fmt::format("forget.scorer must be oracle-diff or model, got '{}'", forget.scorer));
  require(forget.scorer != "model" || !forget.scorer_checkpoint.empty(),
          "forget.scorer_checkpoint is required when forget.scorer = model");

  check_optimizer("learn", learn.optimizer);
  require(learn.batch >= 1, "learn.batch must be >= 1");
  require(learn.epochs >= 1, "learn.epochs must be >= 1");
  require(learn.beta > 0.0, fmt::format("learn.beta must be positive, got {}", learn.beta));
  require(learn.v >= 0.0 && learn.v < 100.0, fmt::format("learn.v must be in [0, 100), got {}", learn.v));

  require(eval.max_len >= 1, "eval.max_len must be >= 1");
  require(!out_dir.empty(), "run.out_dir must not be empty");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += fmt::format("{} = {}\n", k, v);
  return out;
}

std::string RunConfig::digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [k, v] : entries()) {
    if (k == "run.out_dir") continue;
    for (char c : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
  }
  return fmt::format("{:016x}", h);
}

RunConfig RunConfig::parse(const std::string& text, RunConfig cfg) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected 'section.key = value'", lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(fmt::format("line {}: key '{}' given twice", lineno, key));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str(), base);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

RunConfig RunConfig::parse(const std::string& text) { return parse(text, RunConfig{}); }

RunConfig RunConfig::load(const std::filesystem::path& path) { return load(path, RunConfig{}); }

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "paper-qa" || name == "paper-math" || name == "paper-alignment") {
    const bool math = name == "paper-math";
    const bool alignment = name == "paper-alignment";
    const std::size_t batch = math ? 512 : alignment ? 128 : 32;
    c.stage1.optimizer.learning_rate = math ? 5e-8 : 1e-7;
    c.forget.optimizer.learning_rate = math ? 5e-8 : 1e-7;
    c.learn.optimizer.learning_rate = math ? 1e-6 : 5e-6;
    c.forget.optimizer.kind = c.learn.optimizer.kind = OptimizerKind::adam;
    c.stage1.batch = c.forget.batch = c.learn.batch = batch;
    c.stage1.k1 = alignment ? 10.0 : 5.0;
    c.stage1.k2 = math ? 20.0 : alignment ? 15.0 : 10.0;
    c.forget.u = 0.95;
    c.learn.v = math ? 50.0 : 20.0;
    c.stage1.beta = c.forget.beta = c.learn.beta = 0.1;
    return c;
  }
  if (name == "desk") return c;
  throw ConfigError(fmt::format("unknown preset '{}' (expected desk, paper-qa, paper-math or paper-alignment)", name));
}

}  // namespace allo::pipeline
