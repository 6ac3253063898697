#include "lsblt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "lsblt/error.hpp"
#include "lsblt/random.hpp"

namespace lsblt {
namespace {

using Json = nlohmann::ordered_json;

constexpr std::uint64_t kRoundSalt = 0x9E3779B97F4A7C15ULL;

EvalReport evaluate_classifier(const ReferenceClassifier& classifier, const SampleSet& heldout,
                               const std::vector<double>& targets) {
  const auto bin = binarize(classifier.rescore(heldout));
  try {
    return evaluate(bin.scores, bin.labels, targets);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("held-out evaluation: ") + e.what());
  }
}

Strategy headline(const std::vector<SelectionEntry>& entries) {
  bool lsb = false;
  for (const auto& e : entries) {
    if (e.strategy == Strategy::kLsbLt) return Strategy::kLsbLt;
    if (e.strategy == Strategy::kLsb) lsb = true;
  }
  if (lsb) return Strategy::kLsb;
  return entries.empty() ? Strategy::kRandom : entries.front().strategy;
}

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!j.is_object()) throw DataError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw DataError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

void validate_round_config(const RoundConfig& c) {
  if (!(c.lt_threshold >= 0.0 && c.lt_threshold <= 1.0)) {
    throw DataError("round config: lt_threshold must be in [0, 1]");
  }
  if (c.statistical_mix.size() != 3) throw DataError("round config: statistical_mix needs 3 ratios");
  double mix = 0.0;
  for (double r : c.statistical_mix) {
    if (!(r >= 0.0)) throw DataError("round config: statistical_mix ratios must be >= 0");
    mix += r;
  }
  if (c.budgets.statistical > 0 && mix <= 0.0) {
    throw DataError("round config: statistical_mix sums to zero");
  }
  if (c.seed_rule.mode == SeedRule::Mode::kQuantile &&
      !(c.seed_rule.value >= 0.0 && c.seed_rule.value <= 1.0)) {
    throw DataError("round config: seed quantile must be in [0, 1]");
  }
  if (c.knn.k == 0) throw DataError("round config: k must be >= 1");
  if (!c.knn.dedupe) throw DataError("round config: knn dedupe must be on for round batches");
  if (c.threads == 0) throw DataError("round config: threads must be >= 1");
}

std::string to_json(const RoundConfig& c) {
  Json j;
  j["budgets"] = {{"random", c.budgets.random},
                  {"statistical", c.budgets.statistical},
                  {"lsb", c.budgets.lsb},
                  {"lsb_lt", c.budgets.lsb_lt}};
  j["statistical_mix"] = c.statistical_mix;
  j["seed_rule"] = {
      {"mode", c.seed_rule.mode == SeedRule::Mode::kQuantile ? "quantile" : "threshold"},
      {"value", c.seed_rule.value}};
  j["knn"] = {{"k", c.knn.k},
              {"metric", std::string(to_string(c.knn.metric))},
              {"dedupe", c.knn.dedupe},
              {"exclude_labeled", c.knn.exclude_labeled}};
  j["lt_threshold"] = c.lt_threshold;
  j["lookalike"] = {{"l2", c.lookalike.l2},
                    {"max_iterations", c.lookalike.max_iterations},
                    {"tolerance", c.lookalike.tolerance},
                    {"initial_step", c.lookalike.initial_step},
                    {"step_shrink", c.lookalike.step_shrink},
                    {"max_halvings", c.lookalike.max_halvings},
                    {"balance_classes", c.lookalike.balance_classes},
                    {"init_scale", c.lookalike.init_scale},
                    {"seed", c.lookalike.seed}};
  j["negative_ratio"] = c.negative_ratio;
  j["classifier"] = {{"steps", c.classifier.steps},
                     {"learning_rate", c.classifier.learning_rate},
                     {"momentum", c.classifier.momentum},
                     {"l2", c.classifier.l2},
                     {"hidden", c.classifier.hidden},
                     {"seed", c.classifier.seed}};
  j["rounds"] = c.rounds;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["targets"] = c.targets;
  return j.dump(2);
}

RoundConfig round_config_from_json(std::string_view text, const RoundConfig& base) {
  RoundConfig c = base;
  try {
    const Json j = Json::parse(text);
    check_keys(j,
               {"budgets", "statistical_mix", "seed_rule", "knn", "lt_threshold", "lookalike",
                "negative_ratio", "classifier", "rounds", "seed", "threads", "targets"},
               "round config");
    if (j.contains("budgets")) {
      const auto& b = j.at("budgets");
      check_keys(b, {"random", "statistical", "lsb", "lsb_lt"}, "round config budgets");
      read_if(b, "random", c.budgets.random);
      read_if(b, "statistical", c.budgets.statistical);
      read_if(b, "lsb", c.budgets.lsb);
      read_if(b, "lsb_lt", c.budgets.lsb_lt);
    }
    read_if(j, "statistical_mix", c.statistical_mix);
    if (j.contains("seed_rule")) {
      const auto& s = j.at("seed_rule");
      check_keys(s, {"mode", "value"}, "round config seed_rule");
      if (s.contains("mode")) {
        const auto mode = s.at("mode").get<std::string>();
        if (mode == "quantile") {
          c.seed_rule.mode = SeedRule::Mode::kQuantile;
        } else if (mode == "threshold") {
          c.seed_rule.mode = SeedRule::Mode::kThreshold;
        } else {
          throw DataError("round config seed_rule: unknown mode '" + mode + "'");
        }
      }
      read_if(s, "value", c.seed_rule.value);
    }
    if (j.contains("knn")) {
      const auto& k = j.at("knn");
      check_keys(k, {"k", "metric", "dedupe", "exclude_labeled"}, "round config knn");
      read_if(k, "k", c.knn.k);
      if (k.contains("metric")) {
        try {
          c.knn.metric = parse_metric(k.at("metric").get<std::string>());
        } catch (const std::invalid_argument& e) {
          throw DataError(std::string("round config knn: ") + e.what());
        }
      }
      read_if(k, "dedupe", c.knn.dedupe);
      read_if(k, "exclude_labeled", c.knn.exclude_labeled);
    }
    read_if(j, "lt_threshold", c.lt_threshold);
    if (j.contains("lookalike")) {
      const auto& l = j.at("lookalike");
      check_keys(l,
                 {"l2", "max_iterations", "tolerance", "initial_step", "step_shrink",
                  "max_halvings", "balance_classes", "init_scale", "seed"},
                 "round config lookalike");
      read_if(l, "l2", c.lookalike.l2);
      read_if(l, "max_iterations", c.lookalike.max_iterations);
      read_if(l, "tolerance", c.lookalike.tolerance);
      read_if(l, "initial_step", c.lookalike.initial_step);
      read_if(l, "step_shrink", c.lookalike.step_shrink);
      read_if(l, "max_halvings", c.lookalike.max_halvings);
      read_if(l, "balance_classes", c.lookalike.balance_classes);
      read_if(l, "init_scale", c.lookalike.init_scale);
      read_if(l, "seed", c.lookalike.seed);
    }
    read_if(j, "negative_ratio", c.negative_ratio);
    if (j.contains("classifier")) {
      const auto& r = j.at("classifier");
      check_keys(r, {"steps", "learning_rate", "momentum", "l2", "hidden", "seed"},
                 "round config classifier");
      read_if(r, "steps", c.classifier.steps);
      read_if(r, "learning_rate", c.classifier.learning_rate);
      read_if(r, "momentum", c.classifier.momentum);
      read_if(r, "l2", c.classifier.l2);
      read_if(r, "hidden", c.classifier.hidden);
      read_if(r, "seed", c.classifier.seed);
    }
    read_if(j, "rounds", c.rounds);
    read_if(j, "seed", c.seed);
    read_if(j, "threads", c.threads);
    read_if(j, "targets", c.targets);
  } catch (const Json::exception& e) {
    throw DataError(std::string("round config: ") + e.what());
  }
  validate_round_config(c);
  return c;
}

PipelineState initial_state(const SyntheticCorpus& corpus, const RoundConfig& config) {
  PipelineState s;
  s.labeled = corpus.labeled;
  s.pool = corpus.pool;
  s.oracle = corpus.oracle;
  s.heldout = corpus.heldout;
  if (s.heldout.empty()) throw DataError("pipeline: held-out set is empty");
  s.classifier = train_reference_classifier(s.labeled, config.classifier);
  s.baseline = evaluate_classifier(s.classifier, s.heldout, config.targets);
  check_state(s);
  return s;
}

void check_state(const PipelineState& s) {
  for (const auto& r : s.pool) {
    if (s.labeled.contains(r.id)) throw DataError("pipeline: id '" + r.id + "' in both D and U");
  }
  if (s.history.size() != static_cast<std::size_t>(s.round)) {
    throw DataError("pipeline: history length " + std::to_string(s.history.size()) +
                    " != round " + std::to_string(s.round));
  }
}

RoundSelection select_round(const PipelineState& state, const RoundConfig& config) {
  validate_round_config(config);
  check_state(state);
  RoundSelection sel;
  sel.round = state.round;
  const Budgets& b = config.budgets;

  const SampleSet pool = state.classifier.rescore(state.pool);
  const SampleSet labeled = state.classifier.rescore(state.labeled);
  if (b.total() > pool.size()) {
    sel.warnings.push_back("total budget " + std::to_string(b.total()) + " exceeds pool size " +
                           std::to_string(pool.size()) + "; selecting the whole pool");
  }

  std::vector<SelectionEntry> entries;
  std::unordered_set<std::string> taken;
  auto room = [&] { return pool.size() - taken.size(); };
  auto take = [&](const SelectionEntry& e) {
    if (taken.insert(e.id).second) {
      entries.push_back(e);
      return true;
    }
    return false;
  };

  KnnConfig knn = config.knn;
  knn.threads = config.threads;
  std::size_t shortfall = 0;
  SelectionBatch lsb, lsb_lt;
  if (b.lsb + b.lsb_lt > 0) {
    sel.seeds = select_seeds(labeled, config.seed_rule);
    sel.stats.seeds = sel.seeds.size();
    if (sel.seeds.empty()) {
      sel.warnings.push_back("empty seed set; LSB budgets moved to statistical");
    } else if (!pool.empty()) {
      lsb = lsb_expand(sel.seeds, labeled, pool, knn);
    }
    sel.stats.lsb_candidates = lsb.entries.size();
    if (b.lsb_lt > 0) {
      auto examples = build_mismatch_dataset(labeled);
      if (config.negative_ratio > 0.0) {
        examples = subsample_negatives(examples, config.negative_ratio,
                                       config.seed + kRoundSalt * static_cast<std::uint64_t>(state.round + 1));
      }
      try {
        sel.lookalike = train_lookalike(examples, config.lookalike);
      } catch (const DataError& e) {
        sel.warnings.push_back(std::string("lookalike not trained: ") + e.what());
      }
      if (sel.lookalike && !lsb.entries.empty()) {
        lsb_lt = lt_filter(*sel.lookalike, lsb, pool, config.lt_threshold);
        std::sort(lsb_lt.entries.begin(), lsb_lt.entries.end(),
                  [](const SelectionEntry& x, const SelectionEntry& y) {
                    if (*x.lookalike_score != *y.lookalike_score) {
                      return *x.lookalike_score > *y.lookalike_score;
                    }
                    return x.id < y.id;
                  });
      }
      sel.stats.lsb_lt_candidates = lsb_lt.entries.size();
    }
  }

  for (const auto& e : lsb_lt.entries) {
    if (sel.stats.picked_lsb_lt == b.lsb_lt || room() == 0) break;
    if (take(e)) ++sel.stats.picked_lsb_lt;
  }
  for (const auto& e : lsb.entries) {
    if (sel.stats.picked_lsb == b.lsb || room() == 0) break;
    if (take(e)) ++sel.stats.picked_lsb;
  }
  shortfall += b.lsb_lt - sel.stats.picked_lsb_lt;
  shortfall += b.lsb - sel.stats.picked_lsb;
  if (shortfall > 0 && !sel.seeds.empty()) {
    sel.warnings.push_back("LSB candidates short by " + std::to_string(shortfall) +
                           "; moved to statistical");
  }

  const std::size_t n_stat = std::min(b.statistical + shortfall, room());
  if (n_stat > 0) {
    const std::vector<std::string> exclude(taken.begin(), taken.end());
    const auto stat =
        select_statistical_mix(pool, n_stat, config.statistical_mix, exclude, config.threads);
    for (const auto& e : stat.entries) take(e);
    sel.stats.picked_statistical = stat.entries.size();
  }

  const std::size_t n_random = std::min(b.random, room());
  if (n_random > 0) {
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!taken.contains(pool[i].id)) free.push_back(i);
    }
    Rng rng(config.seed + kRoundSalt * static_cast<std::uint64_t>(state.round));
    rng.shuffle(free);
    for (std::size_t i = 0; i < n_random; ++i) {
      take({pool[free[i]].id, Strategy::kRandom, std::nullopt, std::nullopt, std::nullopt});
    }
    sel.stats.picked_random = n_random;
  }

  if (entries.size() < b.total() && b.total() <= pool.size()) {
    sel.warnings.push_back("selected " + std::to_string(entries.size()) + " of budget " +
                           std::to_string(b.total()));
  }
  sel.batch.round = state.round;
  sel.batch.strategy = headline(entries);
  sel.batch.entries = std::move(entries);
  return sel;
}

PipelineState apply_annotation(PipelineState state, RoundSelection selection,
                               const std::map<std::string, int>& labels,
                               const RoundConfig& config) {
  std::unordered_set<std::string> moved;
  std::vector<SampleRecord> labeled(state.labeled.records());
  double loss = 0.0;
  for (const auto& e : selection.batch.entries) {
    const SampleRecord* r = state.pool.find(e.id);
    if (!r) throw DataError("annotation: id '" + e.id + "' is not in the pool");
    const auto it = labels.find(e.id);
    if (it == labels.end()) throw DataError("annotation: no label for '" + e.id + "'");
    if (!moved.insert(e.id).second) throw DataError("annotation: duplicate id '" + e.id + "'");
    SampleRecord rec = *r;
    rec.label = it->second;
    rec.probs = state.classifier.predict(rec.embedding);
    loss += multiclass_loss(rec.probs, it->second);
    labeled.push_back(std::move(rec));
  }
  if (!moved.empty()) selection.stats.batch_loss = loss / static_cast<double>(moved.size());
  auto& st = selection.stats;
  st.picked_random = st.picked_statistical = st.picked_lsb = st.picked_lsb_lt = 0;
  for (const auto& e : selection.batch.entries) {
    switch (e.strategy) {
      case Strategy::kRandom: ++st.picked_random; break;
      case Strategy::kLsb: ++st.picked_lsb; break;
      case Strategy::kLsbLt: ++st.picked_lsb_lt; break;
      default: ++st.picked_statistical; break;
    }
  }

  std::vector<SampleRecord> pool;
  pool.reserve(state.pool.size() - moved.size());
  for (const auto& r : state.pool) {
    if (!moved.contains(r.id)) pool.push_back(r);
  }
  state.labeled = SampleSet(state.labeled.dims(), std::move(labeled));
  state.pool = SampleSet(state.pool.dims(), std::move(pool));
  for (const auto& id : moved) state.oracle.erase(id);

  state.classifier = train_reference_classifier(state.labeled, config.classifier);
  RoundRecord rec;
  rec.round = state.round;
  rec.batch = std::move(selection.batch);
  rec.lookalike = selection.lookalike;
  rec.report = evaluate_classifier(state.classifier, state.heldout, config.targets);
  rec.stats = selection.stats;
  rec.warnings = std::move(selection.warnings);
  state.lookalike = std::move(selection.lookalike);
  state.history.push_back(std::move(rec));
  ++state.round;
  check_state(state);
  return state;
}

PipelineState run_round(const PipelineState& state, const RoundConfig& config) {
  auto sel = select_round(state, config);
  const auto oracle = state.oracle;
  return apply_annotation(state, std::move(sel), oracle, config);
}

std::filesystem::path round_dir(const std::filesystem::path& dir, int round) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "round_%03d", round);
  return dir / buf;
}

void persist_corpus(const PipelineState& state, const std::filesystem::path& dir) {
  SyntheticCorpus corpus;
  corpus.labeled = state.labeled;
  corpus.pool = state.pool;
  corpus.oracle = state.oracle;
  corpus.heldout = state.heldout;
  write_corpus(corpus, dir / "corpus");
}

namespace {

Json summary_json(const RoundRecord& r) {
  Json j;
  j["round"] = r.round;
  j["selected"] = r.batch.entries.size();
  j["seeds"] = r.stats.seeds;
  j["lsb_candidates"] = r.stats.lsb_candidates;
  j["lsb_lt_candidates"] = r.stats.lsb_lt_candidates;
  j["picked"] = {{"random", r.stats.picked_random},
                 {"statistical", r.stats.picked_statistical},
                 {"lsb", r.stats.picked_lsb},
                 {"lsb_lt", r.stats.picked_lsb_lt}};
  j["batch_loss"] = r.stats.batch_loss;
  j["auc"] = r.report.auc;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace

void persist_round(const RoundRecord& record, const std::filesystem::path& dir) {
  const auto rdir = round_dir(dir, record.round);
  std::filesystem::create_directories(rdir);
  write_selection(record.batch, rdir / "batch.jsonl");
  if (record.lookalike) save_lookalike(*record.lookalike, rdir / "lookalike.json");
  save_eval_report(record.report, rdir / "eval.json");
  write_text(rdir / "summary.json", summary_json(record).dump(2) + "\n");
}

std::vector<SelectionBatch> load_round_batches(const std::filesystem::path& dir) {
  std::vector<SelectionBatch> out;
  for (int r = 0;; ++r) {
    const auto path = round_dir(dir, r) / "batch.jsonl";
    if (!std::filesystem::exists(path)) break;
    out.push_back(read_selection(path, r));
  }
  return out;
}

LoopResult run_loop(PipelineState state, const RoundConfig& config, std::size_t rounds,
                    const std::optional<std::filesystem::path>& out_dir,
                    std::string_view config_echo) {
  if (rounds == 0) throw DataError("run_loop: rounds must be >= 1");
  validate_round_config(config);
  std::ofstream log;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    persist_corpus(state, *out_dir);
    log.open(*out_dir / "run_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log) throw DataError("cannot write run log under '" + out_dir->string() + "'");
    Json head;
    head["event"] = "config";
    try {
      head["config"] = Json::parse(config_echo.empty() ? std::string_view(to_json(config))
                                                       : config_echo);
    } catch (const Json::exception&) {
      head["config"] = std::string(config_echo);
    }
    head["baseline_auc"] = state.baseline.auc;
    log << head.dump() << '\n';
  }
  LoopResult result;
  for (std::size_t i = 0; i < rounds; ++i) {
    state = run_round(state, config);
    const auto& rec = state.history.back();
    result.reports.push_back(rec.report);
    if (out_dir) {
      persist_round(rec, *out_dir);
      Json line = summary_json(rec);
      line["event"] = "round";
      line["labeled"] = state.labeled.size();
      line["pool"] = state.pool.size();
      log << line.dump() << '\n';
    }
  }
  result.state = std::move(state);
  return result;
}

PipelineState replay(const SyntheticCorpus& corpus, const std::vector<SelectionBatch>& batches,
                     const RoundConfig& config) {
  PipelineState state = initial_state(corpus, config);
  for (const auto& batch : batches) {
    RoundSelection sel;
    sel.round = state.round;
    sel.batch = batch;
    sel.batch.round = state.round;
    const auto oracle = state.oracle;
    state = apply_annotation(std::move(state), std::move(sel), oracle, config);
  }
  return state;
}

StrategyLosses compare_strategies(const SyntheticCorpus& corpus, const ComparisonConfig& config) {
  const SampleSet truth = with_oracle_labels(corpus.pool, corpus.oracle);
  const std::size_t budget = std::min(config.budget, corpus.pool.size());
  StrategyLosses out;

  out.random = mean_multiclass_loss(truth, select_random(corpus.pool, budget, config.seed).ids());

  const auto stat = select_statistical_mix(corpus.pool, budget, kDefaultStatisticalMix, {},
                                           config.knn.threads);
  out.statistical = mean_multiclass_loss(truth, stat.ids());

  const auto seeds = select_seeds(corpus.labeled, config.seed_rule);
  const auto lsb = lsb_expand(seeds, corpus.labeled, corpus.pool, config.knn);
  out.lsb_size = lsb.entries.size();
  out.lsb = out.lsb_size ? mean_multiclass_loss(truth, lsb.ids()) : NAN;

  const auto model = train_lookalike(build_mismatch_dataset(corpus.labeled), config.lookalike);
  const auto lt = lt_filter(model, lsb, corpus.pool, config.lt_threshold);
  out.lsb_lt_size = lt.entries.size();
  out.lsb_lt = out.lsb_lt_size ? mean_multiclass_loss(truth, lt.ids()) : NAN;
  return out;
}

}  // namespace lsblt
