#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "lsblt/datastore.hpp"
#include "lsblt/error.hpp"
#include "lsblt/random.hpp"
#include "lsblt/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace lsblt {
namespace {

using testing_util::read_file;
using testing_util::TempDir;
using testing_util::write_file;

SampleRecord rec(std::string id, std::vector<double> h, std::vector<double> p,
                 std::optional<int> label = std::nullopt) {
  SampleRecord r;
  r.id = std::move(id);
  r.embedding = std::move(h);
  r.probs = std::move(p);
  r.label = label;
  return r;
}

TEST(Datastore, LoadsSmallestCorpus) {
  TempDir dir;
  write_file(dir / "a.jsonl", R"({"id":"a","embedding":[0,0],"probs":[1,0],"label":0})" "\n");
  const auto set = load_samples(dir / "a.jsonl");
  EXPECT_EQ(set.dims().embedding_dim, 2u);
  EXPECT_EQ(set.dims().num_classes, 2u);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set[0].id, "a");
  EXPECT_EQ(set[0].label, 0);
}

TEST(Datastore, RejectsUnnormalizedProbsNamingId) {
  TempDir dir;
  write_file(dir / "a.jsonl", R"({"id":"a","embedding":[0,0],"probs":[0.6,0.6],"label":0})" "\n");
  try {
    load_samples(dir / "a.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("probs not normalized"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'a'"), std::string::npos) << msg;
  }
}

TEST(Datastore, MalformedLineReportsLineNumber) {
  TempDir dir;
  write_file(dir / "a.jsonl",
             R"({"id":"a","embedding":[0,1],"probs":[1,0]})" "\n"
             "{not json\n");
  try {
    load_samples(dir / "a.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Datastore, DimMismatchAndDuplicateIdRejected) {
  EXPECT_THROW(SampleSet::infer({rec("a", {0, 1}, {1, 0}), rec("b", {0, 1, 2}, {1, 0})}),
               DataError);
  EXPECT_THROW(SampleSet::infer({rec("a", {0, 1}, {1, 0}), rec("a", {1, 1}, {0, 1})}),
               DataError);
  try {
    SampleSet::infer({rec("a", {0, 1}, {1, 0}), rec("a", {1, 1}, {0.5, 0.6})});
    FAIL();
  } catch (const DataError& e) {
    // Every violation is listed, not just the first.
    EXPECT_EQ(e.details().size(), 2u);
  }
}

TEST(Datastore, ValidateRecordExamples) {
  const Dims dims{2, 4, std::nullopt};
  EXPECT_TRUE(validate_record(rec("x", {1, 2}, {0.25, 0.25, 0.25, 0.25}, 3), dims).empty());
  EXPECT_EQ(validate_record(rec("x", {1, 2}, {0.2, 0.3, 0.5}), dims).size(), 1u);
  // Negative entry, and the sum 1.0 stays inside tolerance: just one error.
  EXPECT_EQ(validate_record(rec("x", {1, 2}, {-0.1, 1.1, 0, 0}), dims).size(), 1u);
  // Outside tolerance as well: two errors.
  EXPECT_EQ(validate_record(rec("x", {1, 2}, {-0.1, 1.2, 0, 0}), dims).size(), 2u);
  EXPECT_EQ(validate_record(rec("x", {1, 2, 3}, {1, 0}, 7), dims).size(), 3u);
}

TEST(Datastore, ValidationIsTotalOnGarbage) {
  Rng rng(3);
  const std::string alphabet = "{}[]\":,0123456789abcdeilnprtu. \n-";
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const std::size_t len = rng.index(80);
    for (std::size_t i = 0; i < len; ++i) text += alphabet[rng.index(alphabet.size())];
    try {
      const auto set = parse_samples_jsonl(text);
      for (const auto& r : set) EXPECT_TRUE(validate_record(r, set.dims()).empty());
    } catch (const DataError& e) {
      EXPECT_FALSE(std::string(e.what()).empty());
    }
  }
}

TEST(Datastore, JsonlRoundTripIsByteIdentical) {
  SyntheticCorpusConfig cfg;
  cfg.labeled_size = 1000;
  cfg.pool_size = 10;
  cfg.heldout_size = 10;
  cfg.audio = AudioTaskSpec{3, 2, 4.0, 2.0, 1.0};
  const auto corpus = generate_synthetic_corpus(cfg);
  TempDir dir;
  write_samples(corpus.labeled, dir / "one.jsonl");
  const auto loaded = load_samples(dir / "one.jsonl");
  write_samples(loaded, dir / "two.jsonl");
  EXPECT_EQ(read_file(dir / "one.jsonl"), read_file(dir / "two.jsonl"));
  ASSERT_EQ(loaded.size(), corpus.labeled.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    ASSERT_EQ(loaded[i], corpus.labeled[i]) << i;
  }
}

TEST(Datastore, ParallelLoadMatchesSequential) {
  SyntheticCorpusConfig cfg;
  cfg.labeled_size = 777;
  const auto text = samples_to_jsonl(generate_synthetic_corpus(cfg).labeled);
  const auto one = parse_samples_jsonl(text, 1);
  for (std::size_t threads : {2u, 3u, 8u}) {
    const auto many = parse_samples_jsonl(text, threads);
    EXPECT_EQ(many.records(), one.records());
    EXPECT_EQ(many.dims(), one.dims());
  }
}

TEST(Datastore, PackedRoundTripIsBitExactForFloatValues) {
  Rng rng(11);
  std::vector<SampleRecord> records;
  for (int i = 0; i < 200; ++i) {
    SampleRecord r;
    r.id = "r" + std::to_string(i);
    for (int j = 0; j < 5; ++j) r.embedding.push_back(static_cast<float>(rng.normal()));
    r.probs = {0.25, 0.5, 0.25};
    if (i % 3) r.label = i % 3;
    if (i % 2) {
      r.audio = AudioRows{};
      for (int t = 0; t < 1 + i % 4; ++t) {
        r.audio->push_back({static_cast<float>(rng.normal()), static_cast<float>(rng.normal())});
      }
    }
    if (i % 5 == 0) r.tags = std::map<std::string, std::string>{{"split", "x"}};
    records.push_back(std::move(r));
  }
  const auto set = SampleSet::infer(records);
  TempDir dir;
  write_samples(set, dir / "set.json", Format::kPacked);
  const auto loaded = load_samples(dir / "set.json", {Format::kPacked, 1});
  ASSERT_EQ(loaded.size(), set.size());
  for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(loaded[i], set[i]) << i;
}

TEST(Datastore, RecordOrderPreserved) {
  std::vector<SampleRecord> records;
  for (int i = 9; i >= 0; --i) records.push_back(rec("z" + std::to_string(i), {1, 0}, {1, 0}));
  const auto set = SampleSet::infer(records);
  const auto again = parse_samples_jsonl(samples_to_jsonl(set));
  for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(again[i].id, records[i].id);
}

TEST(Selection, EmptyBatchWritesEmptyFile) {
  TempDir dir;
  write_selection(SelectionBatch{}, dir / "b.jsonl");
  EXPECT_EQ(read_file(dir / "b.jsonl"), "");
}

TEST(Selection, LinesInBatchOrderWithFixedKeys) {
  SelectionBatch b;
  b.strategy = Strategy::kLsbLt;
  b.entries = {{"c", Strategy::kLsbLt, 0.25, "s1", 0.75},
               {"a", Strategy::kMargin, -0.5, std::nullopt, std::nullopt},
               {"b", Strategy::kRandom, std::nullopt, std::nullopt, std::nullopt}};
  const auto text = selection_to_jsonl(b);
  EXPECT_EQ(text,
            R"({"id":"c","strategy":"lsb_lt","score":0.25,"seed_id":"s1","lookalike_score":0.75})" "\n"
            R"({"id":"a","strategy":"margin","score":-0.5,"seed_id":null,"lookalike_score":null})" "\n"
            R"({"id":"b","strategy":"random","score":null,"seed_id":null,"lookalike_score":null})" "\n");
}

TEST(Selection, WriteReadWriteIsIdempotent) {
  Rng rng(5);
  SelectionBatch b;
  for (int i = 0; i < 50; ++i) {
    b.entries.push_back({"id" + std::to_string(i), Strategy::kLsb, rng.normal(),
                         "seed" + std::to_string(i % 7), rng.uniform()});
  }
  TempDir dir;
  write_selection(b, dir / "one.jsonl");
  const auto back = read_selection(dir / "one.jsonl");
  EXPECT_EQ(back.entries, b.entries);
  write_selection(back, dir / "two.jsonl");
  EXPECT_EQ(read_file(dir / "one.jsonl"), read_file(dir / "two.jsonl"));
}

TEST(Selection, DuplicateIdsRejected) {
  SelectionBatch b;
  b.entries = {{"a", Strategy::kRandom, {}, {}, {}}, {"a", Strategy::kRandom, {}, {}, {}}};
  EXPECT_EQ(validate_batch(b).size(), 1u);
  TempDir dir;
  EXPECT_THROW(write_selection(b, dir / "b.jsonl"), DataError);
}

TEST(Selection, UnwritablePathIsDataError) {
  EXPECT_THROW(write_selection(SelectionBatch{}, "/nonexistent/dir/b.jsonl"), DataError);
}

}  // namespace
}  // namespace lsblt
