#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "lsblt/datastore.hpp"
#include "lsblt/pipeline.hpp"
#include "lsblt/synthetic.hpp"
#include "test_util.hpp"

namespace lsblt {
namespace {

namespace fs = std::filesystem;
using testing_util::read_file;
using testing_util::TempDir;
using testing_util::write_file;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

const char* kThreeRecords =
    R"({"id":"a","embedding":[1,0],"probs":[0.5,0.5,0],"label":1})" "\n"
    R"({"id":"b","embedding":[0,1],"probs":[1,0,0],"label":0})" "\n"
    R"({"id":"c","embedding":[1,1],"probs":[0.2,0.3,0.5],"label":2})" "\n";

// Small corpus so CLI runs stay quick.
const char* kSmallConfig = R"({
  "corpus": {"labeled_size": 200, "pool_size": 800, "heldout_size": 300},
  "round": {"classifier": {"steps": 100}}
})";

TEST(Cli, NoArgumentsPrintsUsage) {
  const auto r = run({});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("validate"), std::string::npos);
  EXPECT_NE(r.err.find("grad-check"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  // --strategy is required.
  EXPECT_EQ(run({"score", "--input", "x.jsonl"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"score", "--strategy", "margin"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST(Cli, ScoreMaxEntropyMatchesHandValues) {
  TempDir dir;
  write_file(dir / "three.jsonl", kThreeRecords);
  const auto r = run({"score", "--strategy", "max_entropy", "--input", (dir / "three.jsonl").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  std::istringstream lines(r.out);
  std::vector<std::pair<std::string, double>> got;
  std::string id;
  double v;
  while (lines >> id >> v) got.push_back({id, v});
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0].first, "a");
  EXPECT_NEAR(got[0].second, std::log(2.0), 1e-12);
  EXPECT_EQ(got[1].first, "b");
  EXPECT_EQ(got[1].second, 0.0);
  EXPECT_EQ(got[2].first, "c");
  EXPECT_NEAR(got[2].second, -(0.2 * std::log(0.2) + 0.3 * std::log(0.3) + 0.5 * std::log(0.5)),
              1e-12);
}

TEST(Cli, ScoreBudgetAndRandomNeedSeed) {
  TempDir dir;
  write_file(dir / "three.jsonl", kThreeRecords);
  const auto in = (dir / "three.jsonl").string();
  const auto top = run({"score", "--strategy", "least_confident", "--budget", "2", "--input", in});
  ASSERT_EQ(top.code, cli::kExitOk) << top.err;
  const auto batch = parse_selection_jsonl(top.out);
  // a and c both score exactly 0.5; ties go to the smaller id.
  EXPECT_EQ(batch.ids(), (std::vector<std::string>{"a", "c"}));
  EXPECT_EQ(run({"score", "--strategy", "random", "--budget", "2", "--input", in}).code,
            cli::kExitUsage);
  EXPECT_EQ(run({"--seed", "1", "score", "--strategy", "random", "--budget", "2", "--input", in}).code,
            cli::kExitOk);
  EXPECT_EQ(run({"score", "--strategy", "margin", "--budget", "9", "--input", in}).code,
            cli::kExitData);
}

TEST(Cli, DataErrorsExitTwo) {
  TempDir dir;
  EXPECT_EQ(run({"validate", "--input", (dir / "missing.jsonl").string()}).code, cli::kExitData);
  write_file(dir / "bad.jsonl", R"({"id":"a","embedding":[0,0],"probs":[0.6,0.6]})" "\n");
  const auto r = run({"validate", "--input", (dir / "bad.jsonl").string()});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("not normalized"), std::string::npos);
  write_file(dir / "c.json", R"({"corpus": {"nope": 1}})");
  EXPECT_EQ(run({"--config", (dir / "c.json").string(), "--seed", "1", "synth", "--out",
                 (dir / "o").string()})
                .code,
            cli::kExitData);
}

TEST(Cli, ValidateReportsDims) {
  TempDir dir;
  write_file(dir / "three.jsonl", kThreeRecords);
  const auto r = run({"validate", "--input", (dir / "three.jsonl").string()});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find('3'), std::string::npos);
}

TEST(Cli, SelectionChainMatchesLibrary) {
  TempDir dir;
  write_file(dir / "c.json", kSmallConfig);
  const auto cfg = (dir / "c.json").string();
  ASSERT_EQ(run({"--config", cfg, "--seed", "3", "synth", "--out", (dir / "corpus").string()}).code,
            cli::kExitOk);
  const auto labeled = (dir / "corpus" / "labeled.jsonl").string();
  const auto pool = (dir / "corpus" / "pool.jsonl").string();
  ASSERT_EQ(run({"seeds", "--input", labeled, "--quantile", "0.05", "--output",
                 (dir / "seeds.jsonl").string()})
                .code,
            cli::kExitOk);
  ASSERT_EQ(run({"knn", "--labeled", labeled, "--pool", pool, "--seeds",
                 (dir / "seeds.jsonl").string(), "--k", "3", "--output",
                 (dir / "lsb.jsonl").string()})
                .code,
            cli::kExitOk);
  ASSERT_EQ(run({"lookalike-train", "--input", labeled, "--output", (dir / "m.json").string()}).code,
            cli::kExitOk);
  const auto filtered = run({"lt-filter", "--model", (dir / "m.json").string(), "--batch",
                             (dir / "lsb.jsonl").string(), "--pool", pool, "--threshold", "0.3"});
  ASSERT_EQ(filtered.code, cli::kExitOk) << filtered.err;

  const auto L = load_samples(labeled);
  const auto U = load_samples(pool);
  const auto seeds = select_seeds(L, SeedRule::quantile(0.05));
  const auto lsb = lsb_expand(seeds, L, U, KnnConfig{});
  EXPECT_EQ(read_selection(dir / "lsb.jsonl").entries, lsb.entries);
  const auto model = train_lookalike(build_mismatch_dataset(L));
  EXPECT_EQ(parse_selection_jsonl(filtered.out).entries, lt_filter(model, lsb, U, 0.3).entries);

  const auto ev = run({"evaluate", "--input", labeled});
  EXPECT_EQ(ev.code, cli::kExitOk) << ev.err;
  EXPECT_NE(ev.out.find("AUC"), std::string::npos);
}

TEST(Cli, LoopTwiceGivesIdenticalTrees) {
  TempDir dir;
  write_file(dir / "c.json", kSmallConfig);
  const auto cfg = (dir / "c.json").string();
  const auto a = run({"--config", cfg, "--seed", "7", "loop", "--rounds", "2", "--out", (dir / "a").string()});
  const auto b = run({"--config", cfg, "--seed", "7", "loop", "--rounds", "2", "--out", (dir / "b").string()});
  ASSERT_EQ(a.code, cli::kExitOk) << a.err;
  ASSERT_EQ(b.code, cli::kExitOk) << b.err;
  EXPECT_EQ(a.out, b.out);
  const auto ta = tree(dir / "a");
  EXPECT_EQ(ta, tree(dir / "b"));
  EXPECT_TRUE(ta.contains("run_log.jsonl"));
  EXPECT_TRUE(ta.contains("round_001/batch.jsonl"));
  // The run log opens with the effective config.
  EXPECT_NE(ta.at("run_log.jsonl").find("\"labeled_size\":200"), std::string::npos);
}

TEST(Cli, FlagsOverrideConfigFile) {
  TempDir dir;
  write_file(dir / "c.json", kSmallConfig);
  const auto cfg = (dir / "c.json").string();
  ASSERT_EQ(run({"--config", cfg, "--set", "corpus.pool_size=100", "--seed", "1", "synth", "--out",
                 (dir / "o").string()})
                .code,
            cli::kExitOk);
  EXPECT_EQ(load_samples(dir / "o" / "pool.jsonl").size(), 100u);
}

TEST(Cli, ManualRoundThenResume) {
  TempDir dir;
  write_file(dir / "c.json", kSmallConfig);
  const auto cfg = (dir / "c.json").string();
  const auto out = (dir / "run").string();
  const auto m = run({"--config", cfg, "--seed", "2", "round", "--out", out, "--manual"});
  ASSERT_EQ(m.code, cli::kExitOk) << m.err;
  const auto batch_path = fs::path(out) / "round_000" / "batch.jsonl";
  ASSERT_TRUE(fs::exists(batch_path));
  EXPECT_FALSE(fs::exists(fs::path(out) / "round_000" / "eval.json"));

  std::string labels;
  for (const auto& id : read_selection(batch_path).ids()) {
    labels += "{\"id\":\"" + id + "\",\"label\":1}\n";
  }
  write_file(dir / "labels.jsonl", labels);
  const auto r = run({"--config", cfg, "--seed", "2", "round", "--out", out, "--labels",
                      (dir / "labels.jsonl").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(fs::path(out) / "round_000" / "eval.json"));
}

TEST(Cli, FuseTrainEvalAndGradCheck) {
  TempDir dir;
  NeedleTaskConfig nc;
  nc.train_size = 200;
  nc.test_size = 100;
  const auto task = generate_needle_task(nc);
  write_samples(task.train, dir / "train.jsonl");
  write_samples(task.test, dir / "test.jsonl");
  const auto params = (dir / "p.json").string();
  const auto t = run({"--seed", "1", "--set", "toy.epochs=2", "fuse-train", "--train",
                      (dir / "train.jsonl").string(), "--test", (dir / "test.jsonl").string(),
                      "--output", params});
  ASSERT_EQ(t.code, cli::kExitOk) << t.err;
  EXPECT_NE(t.out.find("accuracy"), std::string::npos);
  const auto e = run({"fuse-eval", "--params", params, "--test", (dir / "test.jsonl").string()});
  ASSERT_EQ(e.code, cli::kExitOk) << e.err;
  // Same params, same test set: the accuracy line repeats.
  EXPECT_EQ(t.out.substr(0, t.out.find('\n')), e.out.substr(0, e.out.find('\n')));

  const auto g = run({"--seed", "1", "--json", "grad-check", "--input",
                      (dir / "train.jsonl").string(), "--params", params});
  ASSERT_EQ(g.code, cli::kExitOk) << g.err;
  const auto at = g.out.find("\"max_relative_error\":");
  ASSERT_NE(at, std::string::npos) << g.out;
  EXPECT_LE(std::stod(g.out.substr(at + 21)), 1e-5);
  EXPECT_EQ(run({"grad-check", "--input", (dir / "train.jsonl").string()}).code, cli::kExitUsage);
}

}  // namespace
}  // namespace lsblt
