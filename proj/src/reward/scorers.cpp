// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fmt/format.h>
#include <fstream>

#include "allo/checkpoint.hpp"
#include "allo/error.hpp"
#include "allo/reward.hpp"
#include "json.hpp"

namespace allo::reward {
namespace {

constexpr lm::TokenId kNewline = 2;

lm::Tokens body(const lm::Tokens& response) {
  lm::Tokens out = response;
  if (!out.empty() && out.back() == lm::kEosToken) out.pop_back();
  return out;
}

}  // namespace

std::vector<double> OracleDiffScorer::keep_probabilities(const data::PreferenceTriple& triple) const {
  const auto& a = triple.rejected;
  const auto& b = triple.chosen;
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  // Backtrace preferring match/substitution, then deletion from rejected,
  // then insertion.
  std::vector<double> keep(n, 0.0);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)) {
      keep[i - 1] = a[i - 1] == b[j - 1] ? 1.0 : 0.0;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      keep[--i] = 0.0;
    } else {
      --j;
    }
  }
  return keep;
}

ModelScorer::ModelScorer(lm::Model model, std::string template_id)
    : model_(std::move(model)), template_id_(std::move(template_id)) {
  if (template_id_ != kDefaultTemplate) {
    throw ScorerError(fmt::format("unknown scorer template '{}'", template_id_));
  }
}

ModelScorer ModelScorer::from_checkpoint(const std::filesystem::path& path, std::string template_id) {
  try {
    return ModelScorer(lm::load_checkpoint(path), std::move(template_id));
  } catch (const CheckpointError& e) {
    throw ScorerError(fmt::format("cannot load scorer model: {}", e.what()));
  }
}

lm::Tokens revision_prompt(const data::PreferenceTriple& triple, const std::string& template_id) {
  if (template_id != ModelScorer::kDefaultTemplate) {
    throw ScorerError(fmt::format("unknown scorer template '{}'", template_id));
  }
  lm::Tokens p = triple.prompt;
  p.push_back(kNewline);
  for (auto t : body(triple.chosen)) p.push_back(t);
  p.push_back(kNewline);
  for (auto t : body(triple.rejected)) p.push_back(t);
  p.push_back(kNewline);
  return p;
}

std::vector<double> ModelScorer::keep_probabilities(const data::PreferenceTriple& triple) const {
  const lm::Tokens prompt = revision_prompt(triple, template_id_);
  std::vector<double> lp;
  try {
    NoGradScope no_grad;
    lp = lm::token_logprobs(model_, prompt, triple.rejected);
  } catch (const LengthError& e) {
    throw ScorerError(fmt::format("scorer input does not fit: {}", e.what()));
  } catch (const VocabError& e) {
    throw ScorerError(fmt::format("scorer input out of vocabulary: {}", e.what()));
  }
  for (double& v : lp) v = std::exp(v);
  return lp;
}

TokenWeights score_unaligned(const TokenScorer& scorer, const data::PreferenceTriple& triple, double u) {
  if (!(u > 0.0 && u < 1.0)) throw ContractError(fmt::format("threshold u must be in (0, 1), got {}", u));
  if (triple.rejected.empty()) throw ContractError("score_unaligned needs a nonempty rejected response");
  const std::vector<double> keep = scorer.keep_probabilities(triple);
  if (keep.size() != triple.rejected.size()) {
    throw ScorerError(fmt::format("scorer returned {} probabilities for {} tokens", keep.size(),
                                  triple.rejected.size()));
  }
  TokenWeights r(keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (!std::isfinite(keep[j])) throw ScorerError(fmt::format("scorer returned a non-finite value at {}", j));
    r[j] = keep[j] < u ? 1 : 0;
  }
  return r;
}

void write_r_cache(const std::filesystem::path& path, const std::string& dataset_hash,
                   const std::vector<TokenWeights>& weights) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  out << nlohmann::json{{"dataset_hash", dataset_hash}, {"count", weights.size()}}.dump() << '\n';
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out << nlohmann::json{{"index", i}, {"r", weights[i]}}.dump() << '\n';
  }
}

std::optional<std::vector<TokenWeights>> read_r_cache(const std::filesystem::path& path,
                                                      const std::string& dataset_hash) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    const auto header = nlohmann::json::parse(line);
    if (header.at("dataset_hash").get<std::string>() != dataset_hash) return std::nullopt;
    const auto count = header.at("count").get<std::size_t>();
    std::vector<TokenWeights> out;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (j.at("index").get<std::size_t>() != out.size()) return std::nullopt;
      out.push_back(j.at("r").get<TokenWeights>());
    }
    if (out.size() != count) return std::nullopt;
    return out;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

}  // namespace allo::reward
