// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>

#include "allo/error.hpp"
#include "allo/losses.hpp"
#include "allo/pipeline.hpp"
#include "allo/tasks.hpp"
#include "allo/train.hpp"

namespace allo::pipeline {

PreparedData prepare_data(const RunConfig& cfg) {
  const data::Vocabulary vocab;
  const auto context = static_cast<std::size_t>(cfg.model.context_len);
  PreparedData out;
  if (cfg.data.train_path.empty()) {
    data::SyntheticTask task = data::generate_task(cfg.data.synthetic, vocab);
    for (const auto& t : task.train) {
      if (t.prompt.size() + std::max(t.chosen.size(), t.rejected.size()) > context) {
        throw ConfigError(fmt::format("model.context_len = {} is too small for task {}", context,
                                      data::to_string(cfg.data.synthetic.kind)));
      }
    }
    out.train = std::move(task.train);
    out.sft = std::move(task.sft);
    out.test = std::move(task.test);
  } else {
    data::LoadReport report = data::load_jsonl(cfg.data.train_path, vocab, context);
    out.train = std::move(report.triples);
    if (!cfg.data.sft_path.empty()) {
      out.sft = data::load_sft_jsonl(cfg.data.sft_path, vocab);
    } else {
      for (const auto& t : out.train) out.sft.push_back({t.prompt, t.chosen});
    }
    if (!cfg.data.test_path.empty()) out.test = data::load_test_jsonl(cfg.data.test_path, vocab);
  }
  if (out.train.empty()) throw ConfigError("training set is empty");
  out.dataset_hash = data::dataset_hash(out.train);
  return out;
}

lm::Model sft_fit(const lm::ModelConfig& model_cfg, const std::vector<data::SftExample>& corpus,
                  const SftConfig& cfg, std::uint64_t seed, const MetricsSink& sink) {
  if (corpus.empty()) throw ConfigError("SFT corpus is empty");
  for (const auto& e : corpus) lm::check_sequence(model_cfg, e.prompt, e.response);
  lm::Model model = lm::Model::init(model_cfg);
  Optimizer optimizer(cfg.optimizer, model.params());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : lm::epoch_batches(corpus.size(), cfg.batch, true, seed + epoch)) {
      const lm::StepResult s = lm::optimizer_step(model, optimizer, {}, [&] {
        std::vector<Tensor> losses;
        for (std::size_t i : batch) losses.push_back(loss::sft_loss(model, corpus[i].prompt, corpus[i].response));
        return lm::batch_mean(losses);
      });
      if (sink) sink({step, "sft", s.loss, 0.0, s.grad_norm, cfg.optimizer.learning_rate});
      ++step;
    }
  }
  return model;
}

}  // namespace allo::pipeline
