// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Neuron location: a one-epoch warm-up run, importance from the resulting
// weight change, and masks over the flattened parameter index space.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "allo/dataset.hpp"
#include "allo/model.hpp"
#include "allo/optim.hpp"

namespace allo::atlas {

enum class WarmupMethod { dpo, sft, npo };
std::string to_string(WarmupMethod method);
WarmupMethod parse_warmup_method(const std::string& text);

struct WarmupConfig {
  WarmupMethod method = WarmupMethod::dpo;
  OptimizerConfig optimizer{OptimizerKind::sgd, 1e-2};
  std::size_t batch_size = 8;
  double beta = 0.1;
  bool shuffle = true;
  std::uint64_t seed = 0;
};

/// Called before each update with the pre-step parameters and the batch
/// gradient that the update applies.
using WarmupObserver = std::function<void(std::size_t step, const lm::Model& before, const lm::ParamGrads& grads)>;

struct WarmupResult {
  lm::Model reference;
  double alpha = 0.0;
  WarmupMethod method = WarmupMethod::dpo;
  std::vector<double> losses;
};

/// One epoch of full-parameter training on a copy of `base`. The DPO and NPO
/// ratios are taken against `base` itself. A zero learning rate returns an
/// unchanged copy.
WarmupResult train_reference(const lm::Model& base, const std::vector<data::PreferenceTriple>& triples,
                             const WarmupConfig& cfg, const WarmupObserver& observer = {});

struct ImportanceMap {
  lm::ParamLayout layout;
  std::vector<std::vector<double>> scores;
  double alpha = 0.0;
  WarmupMethod method = WarmupMethod::dpo;

  std::size_t size() const { return lm::layout_size(layout); }
};

/// score = |reference - base| / alpha element-wise.
ImportanceMap estimate_importance(const lm::Model& base, const lm::Model& reference, double alpha);

void save_importance(const ImportanceMap& importance, const std::filesystem::path& path);
ImportanceMap load_importance(const std::filesystem::path& path);

enum class MaskMode { top, last, random };
enum class MaskScope { global, per_tensor };
std::string to_string(MaskMode mode);
std::string to_string(MaskScope scope);
MaskMode parse_mask_mode(const std::string& text);
MaskScope parse_mask_scope(const std::string& text);

struct MaskSpec {
  double ratio = 0.1;
  MaskMode mode = MaskMode::top;
  MaskScope scope = MaskScope::global;
  std::uint64_t seed = 0;
  /// When false, embedding and layer-norm elements are never selected and
  /// the count is taken over the remaining elements.
  bool include_embeddings_and_norms = true;
};

struct NeuronMask {
  lm::ParamLayout layout;
  ElementMask bits;
  MaskSpec spec;

  std::size_t popcount() const;
};

/// Selects llround(ratio * N) elements (per tensor under per-tensor scope).
/// Ties are broken by ascending flattened index.
NeuronMask build_mask(const ImportanceMap& importance, const MaskSpec& spec);
/// Every element selected.
NeuronMask full_mask(const lm::ParamLayout& layout);

void save_mask(const NeuronMask& mask, const std::filesystem::path& path);
NeuronMask load_mask(const std::filesystem::path& path);

struct TensorCount {
  std::string name;
  std::size_t size = 0;
  std::size_t selected = 0;
};

struct MaskReport {
  std::vector<TensorCount> tensors;
  /// (group, selected fraction) with groups "tok_emb", "pos_emb", "h0", ...,
  /// "ln_f", "head" in layout order.
  std::vector<std::pair<std::string, double>> group_fractions;
  std::size_t popcount = 0;
  std::size_t total = 0;

  std::string to_json() const;
};

MaskReport mask_report(const NeuronMask& mask, const lm::Model& model);
MaskReport mask_report(const NeuronMask& mask, const lm::ParamLayout& layout);

}  // namespace allo::atlas
