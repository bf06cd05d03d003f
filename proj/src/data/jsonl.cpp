// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>
#include <fstream>

#include "allo/dataset.hpp"
#include "allo/error.hpp"
#include "json.hpp"

namespace allo::data {
namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  return out;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

json parse_line(const std::string& line, std::size_t lineno, const std::filesystem::path& path) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw ParseError(fmt::format("{}:{}: record is not an object", path.string(), lineno), lineno);
    return j;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()), lineno);
  }
}

std::string text_field(const json& j, const char* key, std::size_t lineno, const std::filesystem::path& path) {
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(fmt::format("{}:{}: missing field \"{}\"", path.string(), lineno, key), lineno);
  if (!it->is_string()) {
    throw ParseError(fmt::format("{}:{}: field \"{}\" is not a string", path.string(), lineno, key), lineno);
  }
  return it->get<std::string>();
}

Tokens tokenize_field(const Vocabulary& vocab, const std::string& text, const char* key, std::size_t lineno,
                      const std::filesystem::path& path) {
  try {
    return vocab.tokenize(text);
  } catch (const EncodingError& e) {
    throw ParseError(fmt::format("{}:{}: field \"{}\": {}", path.string(), lineno, key, e.what()), lineno);
  }
}

std::string response_text(const Vocabulary& vocab, const Tokens& response) {
  Tokens body = response;
  if (!body.empty() && body.back() == kEos) body.pop_back();
  return vocab.detokenize(body);
}

}  // namespace

void PreferenceTriple::validate() const {
  if (prompt.empty()) throw ContractError("preference triple has an empty prompt");
  if (chosen.empty()) throw ContractError("preference triple has an empty chosen response");
  if (rejected.empty()) throw ContractError("preference triple has an empty rejected response");
  if (truth_unaligned) {
    for (std::size_t i : *truth_unaligned) {
      if (i >= rejected.size()) {
        throw ContractError(fmt::format("unaligned index {} out of range for rejected length {}", i, rejected.size()));
      }
    }
  }
}

LoadReport load_jsonl(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t context_len) {
  std::ifstream in = open_input(path);
  LoadReport report;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (blank(line)) continue;
    const json j = parse_line(line, lineno, path);
    PreferenceTriple t;
    t.prompt = tokenize_field(vocab, text_field(j, "prompt", lineno, path), "prompt", lineno, path);
    const std::string chosen = text_field(j, "chosen", lineno, path);
    const std::string rejected = text_field(j, "rejected", lineno, path);
    t.chosen = tokenize_field(vocab, chosen, "chosen", lineno, path);
    t.rejected = tokenize_field(vocab, rejected, "rejected", lineno, path);
    t.chosen.push_back(kEos);
    t.rejected.push_back(kEos);
    if (t.prompt.empty()) throw ParseError(fmt::format("{}:{}: empty prompt", path.string(), lineno), lineno);
    if (const auto it = j.find("unaligned_indices"); it != j.end() && !it->is_null()) {
      if (!it->is_array()) {
        throw ParseError(fmt::format("{}:{}: unaligned_indices is not an array", path.string(), lineno), lineno);
      }
      std::vector<std::size_t> idx;
      for (const auto& v : *it) {
        if (!v.is_number_unsigned() || v.get<std::size_t>() >= t.rejected.size()) {
          throw ParseError(fmt::format("{}:{}: bad unaligned index {}", path.string(), lineno, v.dump()), lineno);
        }
        idx.push_back(v.get<std::size_t>());
      }
      t.truth_unaligned = std::move(idx);
    }
    t.degenerate = t.chosen == t.rejected;
    const std::size_t need = t.prompt.size() + std::max(t.chosen.size(), t.rejected.size());
    if (need > context_len) {
      ++report.skipped_overlong;
      report.warnings.push_back(
          fmt::format("{}:{}: skipped, {} tokens exceed context {}", path.string(), lineno, need, context_len));
      continue;
    }
    report.triples.push_back(std::move(t));
  }
  return report;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<PreferenceTriple>& triples,
                 const Vocabulary& vocab) {
  std::ofstream out = open_output(path);
  for (const auto& t : triples) {
    json j;
    j["prompt"] = vocab.detokenize(t.prompt);
    j["chosen"] = response_text(vocab, t.chosen);
    j["rejected"] = response_text(vocab, t.rejected);
    if (t.truth_unaligned) j["unaligned_indices"] = *t.truth_unaligned;
    out << j.dump() << '\n';
  }
}

std::vector<SftExample> load_sft_jsonl(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in = open_input(path);
  std::vector<SftExample> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (blank(line)) continue;
    const json j = parse_line(line, lineno, path);
    SftExample e;
    e.prompt = tokenize_field(vocab, text_field(j, "prompt", lineno, path), "prompt", lineno, path);
    e.response = tokenize_field(vocab, text_field(j, "response", lineno, path), "response", lineno, path);
    e.response.push_back(kEos);
    if (e.prompt.empty()) throw ParseError(fmt::format("{}:{}: empty prompt", path.string(), lineno), lineno);
    out.push_back(std::move(e));
  }
  return out;
}

void write_sft_jsonl(const std::filesystem::path& path, const std::vector<SftExample>& examples,
                     const Vocabulary& vocab) {
  std::ofstream out = open_output(path);
  for (const auto& e : examples) {
    json j;
    j["prompt"] = vocab.detokenize(e.prompt);
    j["response"] = response_text(vocab, e.response);
    out << j.dump() << '\n';
  }
}

// First record may be a header {"task": ..., "spurious_markers": [...]}.
TestSet load_test_jsonl(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in = open_input(path);
  TestSet test;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (blank(line)) continue;
    const json j = parse_line(line, lineno, path);
    if (j.contains("task")) {
      test.task = text_field(j, "task", lineno, path);
      if (const auto it = j.find("spurious_markers"); it != j.end()) {
        try {
          test.spurious_markers = it->get<std::vector<std::string>>();
        } catch (const json::exception& e) {
          throw ParseError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()), lineno);
        }
      }
      continue;
    }
    TestExample e;
    e.prompt = tokenize_field(vocab, text_field(j, "prompt", lineno, path), "prompt", lineno, path);
    e.answer = text_field(j, "answer", lineno, path);
    if (e.prompt.empty()) throw ParseError(fmt::format("{}:{}: empty prompt", path.string(), lineno), lineno);
    test.examples.push_back(std::move(e));
  }
  return test;
}

void write_test_jsonl(const std::filesystem::path& path, const TestSet& test, const Vocabulary& vocab) {
  std::ofstream out = open_output(path);
  json header;
  header["task"] = test.task;
  header["spurious_markers"] = test.spurious_markers;
  out << header.dump() << '\n';
  for (const auto& e : test.examples) {
    json j;
    j["prompt"] = vocab.detokenize(e.prompt);
    j["answer"] = e.answer;
    out << j.dump() << '\n';
  }
}

std::string dataset_hash(const std::vector<PreferenceTriple>& triples) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  mix(triples.size());
  for (const auto& t : triples) {
    for (const Tokens* seq : {&t.prompt, &t.chosen, &t.rejected}) {
      mix(seq->size());
      for (TokenId id : *seq) mix(static_cast<std::uint64_t>(id));
    }
  }
  return fmt::format("{:016x}", h);
}

}  // namespace allo::data
