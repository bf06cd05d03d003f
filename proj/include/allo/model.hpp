// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tiny pre-norm decoder-only transformer: learned positional embeddings,
// GELU MLP, untied output head.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "allo/tensor.hpp"

namespace allo::lm {

using TokenId = std::int32_t;
using Tokens = std::vector<TokenId>;

/// End-of-sequence is id 0 in every vocabulary.
inline constexpr TokenId kEosToken = 0;

struct ModelConfig {
  std::int64_t vocab_size = 98;
  std::int64_t context_len = 128;
  std::int64_t n_layers = 2;
  std::int64_t n_heads = 2;
  std::int64_t d_model = 64;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;
  /// Ordered (key, value) text pairs; the checkpoint header stores these.
  std::vector<std::pair<std::string, std::string>> fields() const;

  bool operator==(const ModelConfig&) const = default;
  /// Equal in every field except the init seed.
  bool same_architecture(const ModelConfig& other) const;
};

struct ParamSlot {
  std::string name;
  Shape shape;
  bool operator==(const ParamSlot&) const = default;
};

/// Ordered tensor names and shapes. Flattening the slots in order gives the
/// global neuron index space.
using ParamLayout = std::vector<ParamSlot>;

ParamLayout param_layout(const ModelConfig& config);
std::size_t layout_size(const ParamLayout& layout);
/// Embeddings and layer-norm parameters, as opposed to weight matrices and biases
/// of the projections.
bool is_embedding_or_norm(std::string_view tensor_name);

/// Per-tensor gradient buffers aligned with a model's layout.
using ParamGrads = std::vector<std::vector<double>>;

class Model {
 public:
  /// Deterministic initialization from config.seed.
  static Model init(const ModelConfig& config);
  /// Adopts `params`; shapes must match param_layout(config).
  Model(ModelConfig config, std::vector<Tensor> params);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<const Tensor> params() const { return params_; }
  std::span<Tensor> params() { return params_; }
  const Tensor& param(std::string_view name) const;
  Tensor& param(std::string_view name);
  std::size_t neuron_count() const { return layout_size(layout_); }

  /// Deep copy with independent storage.
  Model clone() const;
  /// FNV-1a digest over config and parameter bytes.
  std::uint64_t hash() const;

  /// Gradients of every parameter, zero-filled for tensors off the trace.
  ParamGrads gradients(const Gradients& grads) const;

 private:
  ModelConfig config_;
  ParamLayout layout_;
  std::vector<Tensor> params_;
};

/// Differentiable per-token log P(y_j | x, y_<j), shape [len(response)].
/// The prompt must be nonempty; the model predicts y_0 from the last prompt
/// position.
Tensor token_logprobs_tensor(const Model& model, const Tokens& prompt, const Tokens& response);
std::vector<double> token_logprobs(const Model& model, const Tokens& prompt, const Tokens& response);

/// Sum of token_logprobs in position order; 0 for an empty response.
double sequence_logprob(const Model& model, const Tokens& prompt, const Tokens& response);

/// Full next-token distribution (probabilities) after `context`.
std::vector<double> next_token_distribution(const Model& model, const Tokens& context);

/// Autoregressive generation. temperature == 0 selects the argmax (lowest id
/// on ties). Generation stops after emitting kEosToken (which is included in
/// the result), after max_len tokens, or when the context is full.
Tokens sample(const Model& model, const Tokens& prompt, double temperature, std::size_t max_len,
              std::uint64_t seed);

void check_sequence(const ModelConfig& config, const Tokens& prompt, const Tokens& response);

}  // namespace allo::lm
