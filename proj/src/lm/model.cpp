// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fmt/format.h>

#include "allo/error.hpp"
#include "allo/ops.hpp"
#include "allo/random.hpp"

namespace allo::lm {
namespace {

constexpr double kInitStd = 0.02;
constexpr std::size_t kTensorsPerLayer = 12;

// Offsets within a layer's block of tensors.
enum LayerSlot : std::size_t {
  kLn1Gain, kLn1Bias, kQkvW, kQvB, kProjW, kProjB, kLn2Gain, kLn2Bias, kFcW, kFcB, kMlpProjW, kMlpProjB
};

std::size_t u(std::int64_t v) { return static_cast<std::size_t>(v); }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::uint64_t fnv1a(std::uint64_t h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

// Final-norm hidden states for every position of `ids`, shape [t, d].
Tensor hidden_states(const Model& model, const Tokens& ids) {
  const auto& cfg = model.config();
  auto p = model.params();
  std::vector<std::int32_t> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<std::int32_t>(i);
  Tensor x = ops::add(ops::embedding(p[0], ids), ops::embedding(p[1], positions));
  for (std::size_t l = 0; l < u(cfg.n_layers); ++l) {
    const std::size_t b = 2 + l * kTensorsPerLayer;
    Tensor h = ops::layer_norm(x, p[b + kLn1Gain], p[b + kLn1Bias]);
    Tensor qkv = ops::add_qv_bias(ops::matmul(h, p[b + kQkvW]), p[b + kQvB]);
    Tensor att = ops::causal_attention(qkv, u(cfg.n_heads));
    x = ops::add(x, ops::add(ops::matmul(att, p[b + kProjW]), p[b + kProjB]));
    Tensor h2 = ops::layer_norm(x, p[b + kLn2Gain], p[b + kLn2Bias]);
    Tensor fc = ops::gelu(ops::add(ops::matmul(h2, p[b + kFcW]), p[b + kFcB]));
    x = ops::add(x, ops::add(ops::matmul(fc, p[b + kMlpProjW]), p[b + kMlpProjB]));
  }
  const std::size_t f = 2 + u(cfg.n_layers) * kTensorsPerLayer;
  return ops::layer_norm(x, p[f], p[f + 1]);
}

Tensor head_logits(const Model& model, const Tensor& hidden) {
  const std::size_t f = 2 + u(model.config().n_layers) * kTensorsPerLayer;
  auto p = model.params();
  return ops::add(ops::matmul(hidden, p[f + 2]), p[f + 3]);
}

void check_tokens(const ModelConfig& config, const Tokens& tokens, std::string_view what) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= config.vocab_size) {
      throw VocabError(fmt::format("{} token {} at position {} is outside vocabulary of size {}", what, tokens[i], i,
                                   config.vocab_size));
    }
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError(fmt::format("model.vocab_size must be >= 2, got {}", vocab_size));
  if (context_len < 2) throw ConfigError(fmt::format("model.context_len must be >= 2, got {}", context_len));
  if (n_layers < 1) throw ConfigError(fmt::format("model.n_layers must be positive, got {}", n_layers));
  if (n_heads < 1) throw ConfigError(fmt::format("model.n_heads must be positive, got {}", n_heads));
  if (d_model < 1) throw ConfigError(fmt::format("model.d_model must be positive, got {}", d_model));
  if (d_model % n_heads != 0) {
    throw ConfigError(fmt::format("model.d_model not divisible by model.n_heads ({} % {} != 0)", d_model, n_heads));
  }
}

std::vector<std::pair<std::string, std::string>> ModelConfig::fields() const {
  return {{"vocab_size", std::to_string(vocab_size)}, {"context_len", std::to_string(context_len)},
          {"n_layers", std::to_string(n_layers)},     {"n_heads", std::to_string(n_heads)},
          {"d_model", std::to_string(d_model)},       {"seed", std::to_string(seed)}};
}

bool ModelConfig::same_architecture(const ModelConfig& other) const {
  return vocab_size == other.vocab_size && context_len == other.context_len && n_layers == other.n_layers &&
         n_heads == other.n_heads && d_model == other.d_model;
}

ParamLayout param_layout(const ModelConfig& config) {
  config.validate();
  const std::size_t v = u(config.vocab_size), c = u(config.context_len), d = u(config.d_model);
  ParamLayout layout{{"tok_emb", {v, d}}, {"pos_emb", {c, d}}};
  for (std::int64_t l = 0; l < config.n_layers; ++l) {
    const std::string h = fmt::format("h{}.", l);
    layout.push_back({h + "ln1.gain", {d}});
    layout.push_back({h + "ln1.bias", {d}});
    layout.push_back({h + "attn.qkv.weight", {d, 3 * d}});
    layout.push_back({h + "attn.qv.bias", {2 * d}});
    layout.push_back({h + "attn.proj.weight", {d, d}});
    layout.push_back({h + "attn.proj.bias", {d}});
    layout.push_back({h + "ln2.gain", {d}});
    layout.push_back({h + "ln2.bias", {d}});
    layout.push_back({h + "mlp.fc.weight", {d, 4 * d}});
    layout.push_back({h + "mlp.fc.bias", {4 * d}});
    layout.push_back({h + "mlp.proj.weight", {4 * d, d}});
    layout.push_back({h + "mlp.proj.bias", {d}});
  }
  layout.push_back({"ln_f.gain", {d}});
  layout.push_back({"ln_f.bias", {d}});
  layout.push_back({"head.weight", {d, v}});
  layout.push_back({"head.bias", {v}});
  return layout;
}

std::size_t layout_size(const ParamLayout& layout) {
  std::size_t n = 0;
  for (const auto& slot : layout) n += shape_size(slot.shape);
  return n;
}

bool is_embedding_or_norm(std::string_view name) {
  return name == "tok_emb" || name == "pos_emb" || name.find("ln1.") != std::string_view::npos ||
         name.find("ln2.") != std::string_view::npos || name.starts_with("ln_f.");
}

Model Model::init(const ModelConfig& config) {
  ParamLayout layout = param_layout(config);
  Rng rng(config.seed);
  const double proj_std = kInitStd / std::sqrt(2.0 * static_cast<double>(config.n_layers));
  std::vector<Tensor> params;
  params.reserve(layout.size());
  for (const auto& slot : layout) {
    std::vector<double> values(shape_size(slot.shape), 0.0);
    if (ends_with(slot.name, ".gain")) {
      std::fill(values.begin(), values.end(), 1.0);
    } else if (slot.shape.size() == 2) {
      const bool residual_out = ends_with(slot.name, "attn.proj.weight") || ends_with(slot.name, "mlp.proj.weight");
      const double std = residual_out ? proj_std : kInitStd;
      for (double& x : values) x = std * rng.normal();
    }
    params.emplace_back(slot.shape, std::move(values), true);
  }
  return Model(config, std::move(params));
}

Model::Model(ModelConfig config, std::vector<Tensor> params)
    : config_(config), layout_(param_layout(config)), params_(std::move(params)) {
  if (params_.size() != layout_.size()) {
    throw ContractError(fmt::format("model: expected {} tensors, got {}", layout_.size(), params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].shape() != layout_[i].shape) {
      throw ContractError(fmt::format("model: tensor {} has shape {}, expected {}", layout_[i].name,
                                      shape_string(params_[i].shape()), shape_string(layout_[i].shape)));
    }
    params_[i].set_requires_grad(true);
  }
}

const Tensor& Model::param(std::string_view name) const {
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    if (layout_[i].name == name) return params_[i];
  }
  throw ContractError(fmt::format("model: no parameter named '{}'", name));
}

Tensor& Model::param(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const Model&>(*this).param(name));
}

Model Model::clone() const {
  std::vector<Tensor> copies;
  copies.reserve(params_.size());
  for (const Tensor& p : params_) copies.push_back(p.clone());
  return Model(config_, std::move(copies));
}

std::uint64_t Model::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& [key, value] : config_.fields()) {
    h = fnv1a(h, key.data(), key.size());
    h = fnv1a(h, value.data(), value.size());
  }
  for (const Tensor& p : params_) h = fnv1a(h, p.data().data(), p.size() * sizeof(double));
  return h;
}

ParamGrads Model::gradients(const Gradients& grads) const {
  ParamGrads out;
  out.reserve(params_.size());
  for (const Tensor& p : params_) out.push_back(grads.of(p));
  return out;
}

void check_sequence(const ModelConfig& config, const Tokens& prompt, const Tokens& response) {
  if (prompt.empty()) throw ContractError("token_logprobs: prompt must be nonempty");
  if (prompt.size() + response.size() > u(config.context_len)) {
    throw LengthError(fmt::format("sequence of {} prompt + {} response tokens exceeds context length {}",
                                  prompt.size(), response.size(), config.context_len));
  }
  check_tokens(config, prompt, "prompt");
  check_tokens(config, response, "response");
}

Tensor token_logprobs_tensor(const Model& model, const Tokens& prompt, const Tokens& response) {
  check_sequence(model.config(), prompt, response);
  if (response.empty()) return Tensor::zeros({0});
  Tokens input(prompt);
  input.insert(input.end(), response.begin(), response.end() - 1);
  Tensor hidden = hidden_states(model, input);
  Tensor rows = ops::slice_rows(hidden, prompt.size() - 1, input.size());
  return ops::gather(ops::log_softmax(head_logits(model, rows)), response);
}

std::vector<double> token_logprobs(const Model& model, const Tokens& prompt, const Tokens& response) {
  NoGradScope no_grad;
  Tensor lp = token_logprobs_tensor(model, prompt, response);
  return {lp.data().begin(), lp.data().end()};
}

double sequence_logprob(const Model& model, const Tokens& prompt, const Tokens& response) {
  double total = 0.0;
  for (double v : token_logprobs(model, prompt, response)) total += v;
  return total;
}

std::vector<double> next_token_distribution(const Model& model, const Tokens& context) {
  check_sequence(model.config(), context, {});
  NoGradScope no_grad;
  Tensor hidden = hidden_states(model, context);
  Tensor last = ops::slice_rows(hidden, context.size() - 1, context.size());
  Tensor probs = ops::softmax(head_logits(model, last));
  return {probs.data().begin(), probs.data().end()};
}

Tokens sample(const Model& model, const Tokens& prompt, double temperature, std::size_t max_len,
              std::uint64_t seed) {
  if (!(temperature >= 0.0)) throw ContractError(fmt::format("sample: temperature must be >= 0, got {}", temperature));
  if (max_len < 1) throw ContractError("sample: max_len must be >= 1");
  check_sequence(model.config(), prompt, {});
  NoGradScope no_grad;
  Rng rng(seed);
  Tokens context(prompt);
  Tokens out;
  while (out.size() < max_len && context.size() < u(model.config().context_len)) {
    Tensor hidden = hidden_states(model, context);
    Tensor logits = head_logits(model, ops::slice_rows(hidden, context.size() - 1, context.size()));
    auto z = logits.data();
    TokenId next = 0;
    if (temperature == 0.0) {
      next = static_cast<TokenId>(std::max_element(z.begin(), z.end()) - z.begin());
    } else {
      const double mx = *std::max_element(z.begin(), z.end());
      std::vector<double> w(z.size());
      double total = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) total += (w[i] = std::exp((z[i] - mx) / temperature));
      double target = rng.uniform() * total;
      std::size_t i = 0;
      for (; i + 1 < w.size(); ++i) {
        target -= w[i];
        if (target < 0.0) break;
      }
      next = static_cast<TokenId>(i);
    }
    out.push_back(next);
    context.push_back(next);
    if (next == kEosToken) break;
  }
  return out;
}

}  // namespace allo::lm
