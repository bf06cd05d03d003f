// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>

#include "allo/error.hpp"
#include "allo/eval.hpp"
#include "json.hpp"

namespace allo::eval {

std::vector<CurveSummary> compare_runs(const std::vector<CurveRecord>& curves, double threshold) {
  if (curves.size() < 2) throw ContractError(fmt::format("compare_runs needs at least 2 curves, got {}", curves.size()));
  std::set<std::string> labels;
  std::vector<CurveSummary> rows;
  for (const auto& c : curves) {
    if (!labels.insert(c.run).second) throw ContractError(fmt::format("duplicate run label '{}'", c.run));
    if (c.losses.empty()) throw ContractError(fmt::format("curve '{}' is empty", c.run));
    CurveSummary s;
    s.run = c.run;
    s.final_loss = c.losses.back().second;
    s.final_accuracy = c.accuracy;
    for (std::size_t i = 0; i < c.losses.size(); ++i) {
      if (i > 0 && c.losses[i].first <= c.losses[i - 1].first) {
        throw ContractError(fmt::format("curve '{}' has non-increasing steps", c.run));
      }
      if (!s.steps_to_threshold && c.losses[i].second <= threshold) s.steps_to_threshold = c.losses[i].first;
    }
    rows.push_back(std::move(s));
  }
  return rows;
}

void write_curves_csv(const std::filesystem::path& path, const std::vector<CurveRecord>& curves) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  out << "run,step,loss\n";
  for (const auto& c : curves) {
    if (c.run.find_first_of(",\n") != std::string::npos) {
      throw ContractError(fmt::format("run label '{}' contains a delimiter", c.run));
    }
    for (const auto& [step, loss] : c.losses) out << fmt::format("{},{},{:.17g}\n", c.run, step, loss);
  }
}

std::vector<CurveRecord> read_curves_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != "run,step,loss") {
    throw ParseError(fmt::format("{}:1: expected header run,step,loss", path.string()), 1);
  }
  std::vector<CurveRecord> curves;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string run, step, loss;
    if (!std::getline(fields, run, ',') || !std::getline(fields, step, ',') || !std::getline(fields, loss)) {
      throw ParseError(fmt::format("{}:{}: expected 3 fields", path.string(), lineno), lineno);
    }
    CurveRecord* curve = nullptr;
    for (auto& c : curves) {
      if (c.run == run) curve = &c;
    }
    if (!curve) {
      curves.push_back({run, {}, std::nullopt});
      curve = &curves.back();
    }
    try {
      curve->losses.emplace_back(std::stoull(step), std::stod(loss));
    } catch (const std::exception&) {
      throw ParseError(fmt::format("{}:{}: bad number", path.string(), lineno), lineno);
    }
  }
  return curves;
}

std::string comparison_csv(const std::vector<CurveSummary>& rows) {
  std::string out = "run,final_loss,steps_to_threshold,final_accuracy\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.17g},{},{}\n", r.run, r.final_loss,
                       r.steps_to_threshold ? std::to_string(*r.steps_to_threshold) : "",
                       r.final_accuracy ? fmt::format("{:.17g}", *r.final_accuracy) : "");
  }
  return out;
}

std::string comparison_json(const std::vector<CurveSummary>& rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row{{"run", r.run}, {"final_loss", r.final_loss}};
    row["steps_to_threshold"] = r.steps_to_threshold ? nlohmann::ordered_json(*r.steps_to_threshold) : nullptr;
    row["final_accuracy"] = r.final_accuracy ? nlohmann::ordered_json(*r.final_accuracy) : nullptr;
    j.push_back(std::move(row));
  }
  return j.dump(2);
}

}  // namespace allo::eval
