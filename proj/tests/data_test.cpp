// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "allo/dataset.hpp"
#include "allo/error.hpp"
#include "allo/pipeline.hpp"
#include "allo/tasks.hpp"
#include "allo/vocab.hpp"
#include "test_util.hpp"

namespace allo::data {
namespace {

using testing::TempDir;

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

TEST(Vocabulary, RoundTripsPrintableAscii) {
  const Vocabulary v;
  std::string all;
  for (char c = 0x20; c <= 0x7E; ++c) all.push_back(c);
  all += "\nnext line";
  EXPECT_EQ(v.detokenize(v.tokenize(all)), all);
  EXPECT_TRUE(v.tokenize("").empty());
  EXPECT_EQ(v.detokenize({}), "");
}

TEST(Vocabulary, ReservedIdsAndRange) {
  const Vocabulary v;
  EXPECT_EQ(v.size(), 98u);
  EXPECT_EQ(v.tokenize("\n"), Tokens{2});
  EXPECT_EQ(v.tokenize(" "), Tokens{3});
  EXPECT_EQ(v.tokenize("~"), Tokens{97});
  EXPECT_THROW(v.detokenize({98}), VocabError);
  EXPECT_THROW(v.detokenize({kEos}), VocabError);
  EXPECT_EQ(v.render({40, 41, kEos, 42}), v.detokenize({40, 41}));
  EXPECT_EQ(v.encode_response("ab"), (Tokens{v.tokenize("a")[0], v.tokenize("b")[0], kEos}));
}

TEST(Vocabulary, EncodingErrorCarriesPosition) {
  try {
    Vocabulary{}.tokenize("ab\tc");
    FAIL();
  } catch (const EncodingError& e) {
    EXPECT_EQ(e.position(), 2u);
  }
}

TEST(Jsonl, EmptyFileIsEmpty) {
  const TempDir dir("jsonl-empty");
  write_text(dir / "a.jsonl", "");
  EXPECT_TRUE(load_jsonl(dir / "a.jsonl", Vocabulary{}, 64).triples.empty());
}

TEST(Jsonl, ThreeRecordsInOrder) {
  const TempDir dir("jsonl-three");
  write_text(dir / "a.jsonl",
             "{\"prompt\":\"p1\",\"chosen\":\"c1\",\"rejected\":\"r1\"}\n"
             "{\"prompt\":\"p2\",\"chosen\":\"c2\",\"rejected\":\"r2\",\"unaligned_indices\":[0]}\n"
             "\n"
             "{\"prompt\":\"p3\",\"chosen\":\"c3\",\"rejected\":\"r3\"}\n");
  const Vocabulary v;
  const auto report = load_jsonl(dir / "a.jsonl", v, 64);
  ASSERT_EQ(report.triples.size(), 3u);
  EXPECT_EQ(v.detokenize(report.triples[2].prompt), "p3");
  EXPECT_EQ(report.triples[0].chosen, v.encode_response("c1"));
  EXPECT_EQ(report.triples[1].truth_unaligned, std::vector<std::size_t>{0});
  EXPECT_FALSE(report.triples[0].truth_unaligned.has_value());
}

TEST(Jsonl, MissingFieldNamesLine) {
  const TempDir dir("jsonl-missing");
  write_text(dir / "a.jsonl",
             "{\"prompt\":\"p1\",\"chosen\":\"c1\",\"rejected\":\"r1\"}\n"
             "{\"prompt\":\"p2\",\"chosen\":\"c2\"}\n");
  try {
    load_jsonl(dir / "a.jsonl", Vocabulary{}, 64);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("rejected"), std::string::npos);
  }
}

TEST(Jsonl, MalformedRecords) {
  const TempDir dir("jsonl-bad");
  for (const std::string bad : {"{not json", "[1,2]", "{\"prompt\":1,\"chosen\":\"c\",\"rejected\":\"r\"}",
                                "{\"prompt\":\"\",\"chosen\":\"c\",\"rejected\":\"r\"}",
                                "{\"prompt\":\"p\",\"chosen\":\"c\",\"rejected\":\"r\",\"unaligned_indices\":[9]}"}) {
    write_text(dir / "a.jsonl", bad + "\n");
    EXPECT_THROW(load_jsonl(dir / "a.jsonl", Vocabulary{}, 64), ParseError) << bad;
  }
}

TEST(Jsonl, OverlongRecordsAreSkippedAndCounted) {
  const TempDir dir("jsonl-long");
  write_text(dir / "a.jsonl",
             "{\"prompt\":\"p\",\"chosen\":\"c\",\"rejected\":\"r\"}\n"
             "{\"prompt\":\"pppp\",\"chosen\":\"c\",\"rejected\":\"rrrrrrrr\"}\n");
  const auto report = load_jsonl(dir / "a.jsonl", Vocabulary{}, 8);
  EXPECT_EQ(report.triples.size(), 1u);
  EXPECT_EQ(report.skipped_overlong, 1u);
  EXPECT_FALSE(report.warnings.empty());
}

TEST(Jsonl, WriteThenLoadRoundTrips) {
  const TempDir dir("jsonl-rt");
  SyntheticTaskSpec spec;
  spec.n_train = 20;
  spec.n_test = 5;
  const SyntheticTask task = generate_task(spec, Vocabulary{});
  write_jsonl(dir / "t.jsonl", task.train, Vocabulary{});
  const auto back = load_jsonl(dir / "t.jsonl", Vocabulary{}, 64).triples;
  EXPECT_EQ(dataset_hash(back), dataset_hash(task.train));
  write_test_jsonl(dir / "test.jsonl", task.test, Vocabulary{});
  const TestSet test = load_test_jsonl(dir / "test.jsonl", Vocabulary{});
  EXPECT_EQ(test.task, task.test.task);
  EXPECT_EQ(test.spurious_markers, task.test.spurious_markers);
  ASSERT_EQ(test.examples.size(), 5u);
  EXPECT_EQ(test.examples[4].answer, task.test.examples[4].answer);
}

TEST(Tasks, SameSpecSameData) {
  SyntheticTaskSpec spec;
  spec.kind = TaskKind::keyed_lookup;
  spec.n_train = 100;
  spec.n_test = 20;
  spec.seed = 3;
  EXPECT_EQ(dataset_hash(generate_task(spec, Vocabulary{}).train), dataset_hash(generate_task(spec, Vocabulary{}).train));
  spec.seed = 4;
  SyntheticTaskSpec other = spec;
  other.seed = 3;
  EXPECT_NE(dataset_hash(generate_task(spec, Vocabulary{}).train), dataset_hash(generate_task(other, Vocabulary{}).train));
}

TEST(Tasks, SpuriousSuffixTruthCoversSuffixOnly) {
  SyntheticTaskSpec spec;
  spec.n_train = 200;
  spec.n_test = 10;
  const Vocabulary v;
  for (const auto& t : generate_task(spec, v).train) {
    ASSERT_TRUE(t.truth_unaligned);
    const std::size_t body = t.chosen.size() - 1;  // chosen without end-of-sequence
    ASSERT_GT(t.rejected.size(), t.chosen.size());
    for (std::size_t i = 0; i < body; ++i) EXPECT_EQ(t.rejected[i], t.chosen[i]);
    std::vector<std::size_t> expect;
    for (std::size_t i = body; i + 1 < t.rejected.size(); ++i) expect.push_back(i);
    EXPECT_EQ(*t.truth_unaligned, expect);
  }
}

TEST(Tasks, FullCorruptionChangesEveryAnswerToken) {
  SyntheticTaskSpec spec;
  spec.kind = TaskKind::keyed_lookup;
  spec.corruption_rate = 1.0;
  spec.n_train = 300;
  spec.n_test = 10;
  for (const auto& t : generate_task(spec, Vocabulary{}).train) {
    ASSERT_EQ(t.rejected.size(), t.chosen.size());
    for (std::size_t i = 0; i + 1 < t.chosen.size(); ++i) EXPECT_NE(t.rejected[i], t.chosen[i]);
    EXPECT_EQ(t.truth_unaligned->size(), t.chosen.size() - 1);
  }
}

TEST(Tasks, TrainAndTestPromptsAreDisjoint) {
  for (TaskKind kind : {TaskKind::spurious_suffix, TaskKind::keyed_lookup, TaskKind::biased_arithmetic}) {
    SyntheticTaskSpec spec;
    spec.kind = kind;
    spec.n_train = 500;
    spec.n_test = 100;
    const SyntheticTask task = generate_task(spec, Vocabulary{});
    std::set<Tokens> train;
    for (const auto& t : task.train) train.insert(t.prompt);
    for (const auto& e : task.test.examples) EXPECT_EQ(train.count(e.prompt), 0u) << to_string(kind);
    EXPECT_EQ(task.test.examples.size(), 100u);
    EXPECT_LE(task.train.size(), 500u);
    EXPECT_GT(task.train.size(), 400u);
    EXPECT_EQ(task.sft.size(), task.train.size());
  }
}

TEST(Tasks, BiasedArithmeticRejectedDropsCarries) {
  SyntheticTaskSpec spec;
  spec.kind = TaskKind::biased_arithmetic;
  spec.n_train = 50;
  spec.n_test = 10;
  const Vocabulary v;
  for (const auto& t : generate_task(spec, v).train) {
    const std::string p = v.detokenize(t.prompt);
    const int a = std::stoi(p.substr(0, p.find('+'))), b = std::stoi(p.substr(p.find('+') + 1));
    EXPECT_EQ(v.render(t.chosen), std::to_string(a + b));
    EXPECT_NE(t.rejected, t.chosen);
  }
}

TEST(Tasks, CapacityError) {
  SyntheticTaskSpec spec;
  spec.n_train = task_capacity(TaskKind::spurious_suffix);
  spec.n_test = 1;
  EXPECT_THROW(generate_task(spec, Vocabulary{}), CapacityError);
}

TEST(Tasks, SpecValidation) {
  SyntheticTaskSpec spec;
  spec.corruption_rate = 0.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_THROW(parse_task_kind("poetry"), ConfigError);
  EXPECT_EQ(parse_task_kind("keyed-lookup"), TaskKind::keyed_lookup);
}

TEST(Negatives, SeededAndDistinctFromChosen) {
  const Vocabulary v;
  const lm::Model m = lm::Model::init(testing::tiny_config(9));
  const Tokens prompt = v.tokenize("ab="), chosen = v.encode_response("AB");
  const PreferenceTriple a = synthesize_negative(m, prompt, chosen, 1.0, 5);
  const PreferenceTriple b = synthesize_negative(m, prompt, chosen, 1.0, 5);
  EXPECT_EQ(a.rejected, b.rejected);
  EXPECT_FALSE(a.degenerate);
  EXPECT_NE(a.rejected, chosen);
}

TEST(Negatives, OverfitModelYieldsDegenerate) {
  const Vocabulary v;
  const std::vector<SftExample> corpus{{v.tokenize("ab="), v.encode_response("AB")}};
  pipeline::SftConfig cfg;
  cfg.epochs = 150;
  cfg.optimizer = {OptimizerKind::adam, 1e-2};
  const lm::Model m = pipeline::sft_fit(testing::tiny_config(1), corpus, cfg, 0);
  const PreferenceTriple t = synthesize_negative(m, v.tokenize("ab="), v.encode_response("AB"), 0.0, 5);
  EXPECT_TRUE(t.degenerate);
  EXPECT_EQ(t.rejected, t.chosen);
}

}  // namespace
}  // namespace allo::data
