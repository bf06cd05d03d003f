// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>
#include <fstream>

#include "allo/error.hpp"
#include "allo/eval.hpp"
#include "allo/vocab.hpp"

namespace allo::eval {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

EvalReport evaluate(const lm::Model& model, const data::TestSet& test, std::size_t max_len) {
  if (test.examples.empty()) throw ContractError("empty testset");
  const data::Vocabulary vocab;
  const auto context = static_cast<std::size_t>(model.config().context_len);
  EvalReport report;
  report.task = test.task;
  report.n = test.examples.size();
  std::size_t spurious = 0;
  for (const auto& ex : test.examples) {
    ExampleRecord rec;
    rec.prompt = vocab.render(ex.prompt);
    rec.gold = ex.answer;
    if (ex.prompt.empty() || ex.prompt.size() >= context) {
      rec.overflow = true;
    } else {
      const lm::Tokens out = lm::sample(model, ex.prompt, 0.0, std::min(max_len, context - ex.prompt.size()), 0);
      rec.output = vocab.render(out);
      rec.correct = trim(rec.output) == trim(rec.gold);
      for (const auto& marker : test.spurious_markers) {
        if (rec.output.find(marker) != std::string::npos) rec.spurious = true;
      }
    }
    report.correct += rec.correct ? 1 : 0;
    spurious += rec.spurious ? 1 : 0;
    report.records.push_back(std::move(rec));
  }
  report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.n);
  report.spurious_rate = static_cast<double>(spurious) / static_cast<double>(report.n);
  return report;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  out << "task,n,accuracy,spurious_rate\n";
  for (const auto& r : reports) out << fmt::format("{},{},{:.17g},{:.17g}\n", r.task, r.n, r.accuracy, r.spurious_rate);
}

}  // namespace allo::eval
