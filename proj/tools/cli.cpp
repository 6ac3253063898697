#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsblt/datastore.hpp"
#include "lsblt/error.hpp"
#include "lsblt/latent_knn.hpp"
#include "lsblt/lookalike.hpp"
#include "lsblt/metrics.hpp"
#include "lsblt/pipeline.hpp"
#include "lsblt/synthetic.hpp"
#include "lsblt/uncertainty.hpp"
#include "lsblt/vlmae.hpp"

namespace lsblt::cli {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::optional<std::size_t> threads;
  bool json = false;
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

struct Configs {
  SyntheticCorpusConfig corpus;
  RoundConfig round;
  ToyTrainConfig toy;
  std::map<std::string, std::string> paths;

  std::string echo() const {
    Json j;
    j["corpus"] = Json::parse(to_json(corpus));
    j["round"] = Json::parse(to_json(round));
    j["toy"] = Json::parse(to_json(toy));
    j["paths"] = paths;
    return j.dump(2);
  }
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

// "a.b.c=value"; value is parsed as JSON when it parses, else kept as a string.
void apply_set(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError("--set expects key.path=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::exception&) {
    value = raw;
  }
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw UsageError("--set: empty key in '" + path + "'");
    if (!node->is_object()) throw UsageError("--set: '" + path + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

Configs load_configs(const Common& c) {
  Json doc = Json::object();
  if (!c.config_path.empty()) {
    try {
      doc = Json::parse(read_text(c.config_path));
    } catch (const Json::exception& e) {
      throw DataError("config '" + c.config_path + "': " + e.what());
    }
    if (!doc.is_object()) throw DataError("config: expected a JSON object");
  }
  for (const auto& s : c.sets) apply_set(doc, s);
  for (const auto& [key, _] : doc.items()) {
    if (key != "corpus" && key != "round" && key != "toy" && key != "paths") {
      throw DataError("config: unknown key '" + key + "'");
    }
  }
  Configs cfg;
  if (doc.contains("corpus")) cfg.corpus = corpus_config_from_json(doc["corpus"].dump());
  if (doc.contains("round")) cfg.round = round_config_from_json(doc["round"].dump());
  if (doc.contains("toy")) cfg.toy = toy_config_from_json(doc["toy"].dump());
  if (doc.contains("paths")) {
    const auto& p = doc["paths"];
    if (!p.is_object()) throw DataError("config paths: expected a JSON object");
    for (const auto& [key, v] : p.items()) {
      if (!v.is_string()) throw DataError("config paths: '" + key + "' must be a string");
      cfg.paths[key] = v.get<std::string>();
    }
  }
  if (c.threads) {
    if (*c.threads == 0) throw UsageError("--threads must be >= 1");
    cfg.round.threads = *c.threads;
    cfg.round.knn.threads = *c.threads;
  }
  if (c.seed) {
    cfg.corpus.seed = *c.seed;
    cfg.round.seed = *c.seed;
    cfg.round.classifier.seed = *c.seed;
    cfg.round.lookalike.seed = *c.seed;
    cfg.toy.seed = *c.seed;
    cfg.toy.init.seed = *c.seed;
  }
  validate_round_config(cfg.round);
  return cfg;
}

std::string need_path(const std::optional<std::string>& flag, const Configs& cfg,
                      const std::string& name) {
  if (flag) return *flag;
  const auto it = cfg.paths.find(name);
  if (it != cfg.paths.end()) return it->second;
  throw UsageError("missing required --" + name);
}

std::uint64_t need_seed(const Common& c, const std::string& why) {
  if (!c.seed) throw UsageError("--seed is required " + why);
  return *c.seed;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::map<std::string, int> read_labels(const fs::path& path) {
  std::map<std::string, int> out;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      out[j.at("id").get<std::string>()] = j.at("label").get<int>();
    } catch (const Json::exception& e) {
      throw DataError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void emit_batch(const SelectionBatch& batch, const std::optional<std::string>& output,
                std::ostream& out) {
  if (output) {
    write_selection(batch, *output);
  } else {
    out << selection_to_jsonl(batch);
  }
}

std::vector<double> parse_targets(const std::vector<double>& targets) {
  for (double t : targets) {
    if (!(t > 0.0 && t <= 1.0)) throw UsageError("precision targets must be in (0, 1]");
  }
  return targets;
}

struct PathFlags {
  std::optional<std::string> input, output, labeled, pool, seeds, model, batch, out, train, test,
      params, labels;
};

int cmd_validate(const Common& c, const PathFlags& p, const std::string& format, std::ostream& out) {
  const Configs cfg = load_configs(c);
  const auto set = load_samples(need_path(p.input, cfg, "input"),
                                LoadOptions{parse_format(format), cfg.round.threads});
  const auto& d = set.dims();
  if (c.json) {
    Json j{{"ok", true}, {"records", set.size()}, {"embedding_dim", d.embedding_dim},
           {"num_classes", d.num_classes}};
    j["audio_dim"] = d.audio_dim ? Json(*d.audio_dim) : Json(nullptr);
    out << j.dump() << '\n';
  } else {
    out << "ok: " << set.size() << " records, d=" << d.embedding_dim << ", C=" << d.num_classes;
    if (d.audio_dim) out << ", d_A=" << *d.audio_dim;
    out << '\n';
  }
  return kExitOk;
}

int cmd_score(const Common& c, const PathFlags& p, const std::string& strategy,
              const std::optional<std::size_t>& budget, std::ostream& out) {
  const Configs cfg = load_configs(c);
  const auto set = load_samples(need_path(p.input, cfg, "input"));
  if (strategy == "random") {
    if (!budget) throw UsageError("score --strategy random needs --budget");
    const auto seed = need_seed(c, "for random selection");
    emit_batch(select_random(set, *budget, seed), p.output, out);
    return kExitOk;
  }
  Acquisition a;
  try {
    a = parse_acquisition(strategy);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (budget) {
    emit_batch(select_statistical(set, a, *budget, cfg.round.threads), p.output, out);
    return kExitOk;
  }
  const auto scores = score_all(set, a, cfg.round.threads);
  std::ostringstream text;
  for (const auto& s : scores) {
    if (c.json) {
      text << Json{{"id", s.id}, {"strategy", std::string(to_string(a))}, {"score", s.value}}.dump()
           << '\n';
    } else {
      text << s.id << '\t' << fmt(s.value) << '\n';
    }
  }
  if (p.output) {
    write_text(*p.output, text.str());
  } else {
    out << text.str();
  }
  return kExitOk;
}

int cmd_seeds(const Common& c, const PathFlags& p, const std::optional<double>& threshold,
              const std::optional<double>& quantile, std::ostream& out) {
  const Configs cfg = load_configs(c);
  if (threshold && quantile) throw UsageError("--threshold and --quantile are exclusive");
  SeedRule rule = cfg.round.seed_rule;
  if (threshold) rule = SeedRule::threshold(*threshold);
  if (quantile) rule = SeedRule::quantile(*quantile);
  const auto seeds = select_seeds(load_samples(need_path(p.input, cfg, "input")), rule);
  if (p.output) {
    write_seeds(seeds, *p.output);
    out << seeds.size() << " seeds -> " << *p.output << '\n';
    return kExitOk;
  }
  for (const auto& s : seeds.seeds) {
    if (c.json) {
      out << Json{{"id", s.id}, {"loss", s.loss}}.dump() << '\n';
    } else {
      out << s.id << '\t' << fmt(s.loss) << '\n';
    }
  }
  return kExitOk;
}

int cmd_knn(const Common& c, const PathFlags& p, const std::optional<std::size_t>& k,
            const std::optional<std::string>& metric, std::ostream& out) {
  Configs cfg = load_configs(c);
  KnnConfig knn = cfg.round.knn;
  knn.threads = cfg.round.threads;
  if (k) knn.k = *k;
  if (metric) {
    try {
      knn.metric = parse_metric(*metric);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (knn.k == 0) throw UsageError("--k must be >= 1");
  const auto labeled = load_samples(need_path(p.labeled, cfg, "labeled"));
  const auto pool = load_samples(need_path(p.pool, cfg, "pool"));
  const auto seeds = read_seeds(need_path(p.seeds, cfg, "seeds"));
  emit_batch(lsb_expand(seeds, labeled, pool, knn), p.output, out);
  return kExitOk;
}

int cmd_lookalike_train(const Common& c, const PathFlags& p, const std::optional<double>& l2,
                        const std::optional<double>& negative_ratio, bool balance,
                        std::ostream& out) {
  const Configs cfg = load_configs(c);
  LookalikeConfig lc = cfg.round.lookalike;
  if (l2) lc.l2 = *l2;
  if (balance) lc.balance_classes = true;
  auto examples = build_mismatch_dataset(load_samples(need_path(p.input, cfg, "input")));
  if (negative_ratio && *negative_ratio > 0.0) {
    examples = subsample_negatives(examples, *negative_ratio,
                                   need_seed(c, "with --negative-ratio"));
  }
  const auto model = train_lookalike(examples, lc);
  save_lookalike(model, need_path(p.output, cfg, "output"));
  if (c.json) {
    out << Json{{"iterations", model.iterations}, {"final_loss", model.final_loss},
                {"converged", model.converged}, {"positives", model.positives},
                {"negatives", model.negatives}}
               .dump()
        << '\n';
  } else {
    out << "lookalike: " << model.positives << " mismatches, " << model.negatives
        << " matches, " << model.iterations << " iterations, loss " << fmt(model.final_loss)
        << (model.converged ? "" : " (not converged)") << '\n';
  }
  return kExitOk;
}

int cmd_lt_filter(const Common& c, const PathFlags& p, const std::optional<double>& threshold,
                  std::ostream& out) {
  const Configs cfg = load_configs(c);
  const double t = threshold.value_or(cfg.round.lt_threshold);
  if (!(t >= 0.0 && t <= 1.0)) throw UsageError("--threshold must be in [0, 1]");
  const auto model = load_lookalike(need_path(p.model, cfg, "model"));
  const auto batch = read_selection(need_path(p.batch, cfg, "batch"));
  const auto pool = load_samples(need_path(p.pool, cfg, "pool"));
  emit_batch(lt_filter(model, batch, pool, t), p.output, out);
  return kExitOk;
}

int cmd_evaluate(const Common& c, const PathFlags& p, const std::vector<std::string>& inputs,
                 const std::optional<std::vector<double>>& targets, std::ostream& out) {
  const Configs cfg = load_configs(c);
  std::vector<std::string> files = inputs;
  if (files.empty()) files.push_back(need_path(p.input, cfg, "input"));
  const auto t = parse_targets(targets.value_or(cfg.round.targets));
  std::vector<std::pair<std::string, EvalReport>> rows;
  for (const auto& f : files) {
    const auto bin = binarize(load_samples(f));
    try {
      rows.emplace_back(fs::path(f).stem().string(), evaluate(bin.scores, bin.labels, t));
    } catch (const std::invalid_argument& e) {
      throw DataError(f + ": " + e.what());
    }
  }
  if (p.output) {
    if (rows.size() != 1) throw UsageError("--output needs exactly one input");
    save_eval_report(rows.front().second, *p.output);
  }
  if (c.json) {
    for (const auto& [name, report] : rows) {
      out << Json{{"name", name}, {"report", Json::parse(to_json(report))}}.dump() << '\n';
    }
  } else {
    out << format_report_table(rows);
  }
  return kExitOk;
}

int cmd_synth(const Common& c, const PathFlags& p, std::ostream& out) {
  need_seed(c, "for synth");
  const Configs cfg = load_configs(c);
  const fs::path dir = need_path(p.out, cfg, "out");
  const auto corpus = generate_synthetic_corpus(cfg.corpus);
  write_corpus(corpus, dir);
  write_text(dir / "config.json", cfg.echo() + "\n");
  if (c.json) {
    out << Json{{"labeled", corpus.labeled.size()}, {"pool", corpus.pool.size()},
                {"heldout", corpus.heldout.size()}}
               .dump()
        << '\n';
  } else {
    out << "corpus: " << corpus.labeled.size() << " labeled, " << corpus.pool.size()
        << " pool, " << corpus.heldout.size() << " held-out -> " << dir.string() << '\n';
  }
  return kExitOk;
}

void print_round(const RoundRecord& r, bool json, std::ostream& out) {
  if (json) {
    out << Json{{"round", r.round},
                {"selected", r.batch.entries.size()},
                {"batch_loss", r.stats.batch_loss},
                {"report", Json::parse(to_json(r.report))},
                {"warnings", r.warnings}}
               .dump()
        << '\n';
    return;
  }
  out << "round " << r.round << ": " << r.batch.entries.size() << " annotated (lsb_lt "
      << r.stats.picked_lsb_lt << ", lsb " << r.stats.picked_lsb << ", statistical "
      << r.stats.picked_statistical << ", random " << r.stats.picked_random
      << "), batch loss " << fmt(r.stats.batch_loss) << ", held-out AUC " << fmt(r.report.auc)
      << '\n';
  for (const auto& w : r.warnings) out << "  warning: " << w << '\n';
}

int cmd_round(const Common& c, const PathFlags& p, bool manual, std::ostream& out,
              std::ostream& err) {
  need_seed(c, "for round");
  const Configs cfg = load_configs(c);
  const fs::path dir = need_path(p.out, cfg, "out");
  fs::create_directories(dir);
  SyntheticCorpus corpus = generate_synthetic_corpus(cfg.corpus);
  const auto echo = cfg.echo();
  if (!fs::exists(dir / "corpus")) write_corpus(corpus, dir / "corpus");
  write_text(dir / "config.json", echo + "\n");

  // Completed rounds have eval.json; a batch without one awaits annotation.
  auto batches = load_round_batches(dir);
  std::optional<SelectionBatch> pending;
  if (!batches.empty() && !fs::exists(round_dir(dir, batches.back().round) / "eval.json")) {
    pending = batches.back();
    batches.pop_back();
  }
  for (const auto& b : batches) {
    const auto lpath = round_dir(dir, b.round) / "labels.jsonl";
    if (fs::exists(lpath)) {
      for (const auto& [id, label] : read_labels(lpath)) corpus.oracle[id] = label;
    }
  }
  PipelineState state = replay(corpus, batches, cfg.round);

  RoundSelection sel;
  if (pending) {
    sel.round = state.round;
    sel.batch = *pending;
    const auto lpath = round_dir(dir, state.round) / "lookalike.json";
    if (fs::exists(lpath)) sel.lookalike = load_lookalike(lpath);
  } else {
    sel = select_round(state, cfg.round);
    if (manual) {
      const auto rdir = round_dir(dir, state.round);
      fs::create_directories(rdir);
      write_selection(sel.batch, rdir / "batch.jsonl");
      if (sel.lookalike) save_lookalike(*sel.lookalike, rdir / "lookalike.json");
      for (const auto& w : sel.warnings) err << "warning: " << w << '\n';
      out << "round " << state.round << ": " << sel.batch.entries.size()
          << " ids awaiting annotation -> " << (rdir / "batch.jsonl").string() << '\n';
      return kExitOk;
    }
  }
  if (manual && pending) throw UsageError("round " + std::to_string(state.round) +
                                          " already has a batch; annotate it first");
  std::map<std::string, int> labels = state.oracle;
  if (p.labels) {
    labels = read_labels(*p.labels);
  }
  std::string label_lines;
  for (const auto& e : sel.batch.entries) {
    const auto it = labels.find(e.id);
    if (it == labels.end()) throw DataError("no label for '" + e.id + "'");
    label_lines += Json{{"id", e.id}, {"label", it->second}}.dump() + "\n";
  }
  state = apply_annotation(std::move(state), std::move(sel), labels, cfg.round);
  persist_round(state.history.back(), dir);
  write_text(round_dir(dir, state.round - 1) / "labels.jsonl", label_lines);
  {
    const auto log_path = dir / "run_log.jsonl";
    const bool fresh = !fs::exists(log_path);
    std::ofstream log(log_path, std::ios::binary | std::ios::app);
    if (!log) throw DataError("cannot write '" + log_path.string() + "'");
    if (fresh) log << Json{{"event", "config"}, {"config", Json::parse(echo)}}.dump() << '\n';
    const auto& r = state.history.back();
    log << Json{{"event", "round"}, {"round", r.round}, {"selected", r.batch.entries.size()},
                {"batch_loss", r.stats.batch_loss}, {"auc", r.report.auc},
                {"labeled", state.labeled.size()}, {"pool", state.pool.size()},
                {"warnings", r.warnings}}
               .dump()
        << '\n';
  }
  print_round(state.history.back(), c.json, out);
  return kExitOk;
}

int cmd_loop(const Common& c, const PathFlags& p, const std::optional<std::size_t>& rounds,
             std::ostream& out) {
  need_seed(c, "for loop");
  Configs cfg = load_configs(c);
  if (rounds) cfg.round.rounds = *rounds;
  if (cfg.round.rounds == 0) throw UsageError("--rounds must be >= 1");
  const fs::path dir = need_path(p.out, cfg, "out");
  const auto echo = cfg.echo();
  const auto corpus = generate_synthetic_corpus(cfg.corpus);
  auto state = initial_state(corpus, cfg.round);
  fs::create_directories(dir);
  write_text(dir / "config.json", echo + "\n");
  const auto result = run_loop(std::move(state), cfg.round, cfg.round.rounds, dir, echo);
  std::vector<std::pair<std::string, EvalReport>> rows{{"baseline", result.state.baseline}};
  for (const auto& r : result.state.history) {
    print_round(r, c.json, out);
    rows.emplace_back("round_" + std::to_string(r.round), r.report);
  }
  if (!c.json) out << format_report_table(rows);
  return kExitOk;
}

std::vector<ToySample> toy_from(const std::string& path) {
  return toy_samples_from(load_samples(path));
}

FusionMode mode_of(const std::string& s) {
  try {
    return parse_fusion_mode(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void print_toy(const EvalReport& report, double accuracy, bool json, std::ostream& out) {
  if (json) {
    out << Json{{"accuracy", accuracy}, {"report", Json::parse(to_json(report))}}.dump() << '\n';
  } else {
    out << "accuracy " << fmt(accuracy) << '\n' << format_report_table({{"test", report}});
  }
}

int cmd_fuse_train(const Common& c, const PathFlags& p, const std::string& mode, bool needle,
                   const std::optional<std::size_t>& epochs, const std::optional<double>& lr,
                   const std::optional<std::size_t>& batch_size, std::ostream& out) {
  const auto seed = need_seed(c, "for fuse-train");
  Configs cfg = load_configs(c);
  if (epochs) cfg.toy.epochs = *epochs;
  if (lr) cfg.toy.learning_rate = *lr;
  if (batch_size) cfg.toy.batch_size = *batch_size;
  std::vector<ToySample> train, test;
  if (needle) {
    NeedleTaskConfig nc;
    nc.seed = seed;
    const auto task = generate_needle_task(nc);
    train = toy_samples_from(task.train);
    test = toy_samples_from(task.test);
  } else {
    train = toy_from(need_path(p.train, cfg, "train"));
    test = toy_from(need_path(p.test, cfg, "test"));
  }
  const auto result = train_toy(train, test, cfg.toy, mode_of(mode));
  if (p.output) save_fusion_params(result.params, *p.output);
  print_toy(result.report, result.accuracy, c.json, out);
  return kExitOk;
}

int cmd_fuse_eval(const Common& c, const PathFlags& p, const std::string& mode, std::ostream& out) {
  const Configs cfg = load_configs(c);
  const auto params = load_fusion_params(need_path(p.params, cfg, "params"));
  const auto ev = evaluate_toy(params, toy_from(need_path(p.test, cfg, "test")), mode_of(mode));
  print_toy(ev.report, ev.accuracy, c.json, out);
  return kExitOk;
}

int cmd_grad_check(const Common& c, const PathFlags& p, const std::string& mode,
                   std::size_t batch, double step, std::ostream& out) {
  const auto seed = need_seed(c, "for grad-check");
  const Configs cfg = load_configs(c);
  auto samples = toy_from(need_path(p.input, cfg, "input"));
  if (batch == 0) throw UsageError("--batch must be >= 1");
  if (samples.size() > batch) samples.resize(batch);
  FusionParams params;
  if (p.params) {
    params = load_fusion_params(*p.params);
  } else {
    FusionInit init = cfg.toy.init;
    init.seed = seed;
    int max_label = 0;
    for (const auto& s : samples) max_label = std::max(max_label, s.label);
    params = init_fusion_params(samples.front().audio.cols, samples.front().cls.size(),
                                static_cast<std::size_t>(max_label) + 1, init);
  }
  const auto r = grad_check(params, samples, mode_of(mode), step, seed);
  if (c.json) {
    out << Json{{"max_relative_error", r.max_relative_error}, {"block", r.block},
                {"index", r.index}, {"checked", r.checked}}
               .dump()
        << '\n';
  } else {
    out << "max relative error " << fmt(r.max_relative_error) << " at " << r.block << '['
        << r.index << "] over " << r.checked << " parameters\n";
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-space active learning toolkit", "lsblt"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--threads", common.threads, "Worker threads");
  app.add_flag("--json", common.json, "Machine-readable output");
  app.add_option("--config", common.config_path, "JSON config document");
  app.add_option("--set", common.sets, "Override a config field: section.key=value");
  app.add_option("--seed", common.seed, "Seed for every random draw");

  PathFlags p;
  auto path_opt = [&](CLI::App* sub, const char* name, std::optional<std::string>& slot,
                      const char* help) { sub->add_option(std::string("--") + name, slot, help); };

  auto* validate = app.add_subcommand("validate", "Validate a sample file");
  std::string format = "jsonl";
  path_opt(validate, "input", p.input, "Sample file (packed: the manifest)");
  validate->add_option("--format", format, "jsonl or packed");

  auto* score = app.add_subcommand("score", "Acquisition scores or a top-budget selection");
  std::string strategy;
  std::optional<std::size_t> budget;
  path_opt(score, "input", p.input, "Sample file");
  path_opt(score, "output", p.output, "Output file (default stdout)");
  score->add_option("--strategy", strategy,
                    "least_confident, margin, max_entropy or random")->required();
  score->add_option("--budget", budget, "Select this many instead of scoring all");

  auto* seeds = app.add_subcommand("seeds", "Mine seed badcases from a labeled file");
  std::optional<double> seed_threshold, seed_quantile;
  path_opt(seeds, "input", p.input, "Labeled sample file");
  path_opt(seeds, "output", p.output, "Seed file (default stdout)");
  seeds->add_option("--threshold", seed_threshold, "Keep loss > s_t");
  seeds->add_option("--quantile", seed_quantile, "Keep the top fraction q");

  auto* knn = app.add_subcommand("knn", "Expand seeds into the pool by latent kNN");
  std::optional<std::size_t> k;
  std::optional<std::string> metric;
  path_opt(knn, "labeled", p.labeled, "Labeled sample file holding the seeds");
  path_opt(knn, "pool", p.pool, "Candidate pool file");
  path_opt(knn, "seeds", p.seeds, "Seed file");
  path_opt(knn, "output", p.output, "Batch file (default stdout)");
  knn->add_option("--k", k, "Neighbors per seed");
  knn->add_option("--metric", metric, "cosine or euclidean");

  auto* lt_train = app.add_subcommand("lookalike-train", "Fit the mismatch lookalike model");
  std::optional<double> l2, negative_ratio;
  bool balance = false;
  path_opt(lt_train, "input", p.input, "Labeled sample file");
  path_opt(lt_train, "output", p.output, "Model JSON");
  lt_train->add_option("--l2", l2, "L2 strength");
  lt_train->add_option("--negative-ratio", negative_ratio, "Matches kept per mismatch");
  lt_train->add_flag("--balance", balance, "Inverse-frequency class weights");

  auto* lt = app.add_subcommand("lt-filter", "Keep batch entries with lookalike score >= l_t");
  std::optional<double> lt_threshold;
  path_opt(lt, "model", p.model, "Model JSON");
  path_opt(lt, "batch", p.batch, "Batch file");
  path_opt(lt, "pool", p.pool, "Sample file holding the batch embeddings");
  path_opt(lt, "output", p.output, "Batch file (default stdout)");
  lt->add_option("--threshold", lt_threshold, "l_t");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Zero vs non-zero metrics report");
  std::vector<std::string> eval_inputs;
  std::optional<std::vector<double>> targets;
  evaluate_cmd->add_option("--input", eval_inputs, "Labeled sample file(s)");
  path_opt(evaluate_cmd, "output", p.output, "Report JSON (single input)");
  evaluate_cmd->add_option("--targets", targets, "Precision targets");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  path_opt(synth, "out", p.out, "Output directory");

  auto* round = app.add_subcommand("round", "Run (or resume) one active-learning round");
  bool manual = false;
  path_opt(round, "out", p.out, "Run directory");
  path_opt(round, "labels", p.labels, "Annotations for a pending batch");
  round->add_flag("--manual", manual, "Write the batch and stop before annotation");

  auto* loop = app.add_subcommand("loop", "Run T rounds with simulated annotation");
  std::optional<std::size_t> rounds;
  path_opt(loop, "out", p.out, "Run directory");
  loop->add_option("--rounds", rounds, "Number of rounds T");

  auto* fuse_train = app.add_subcommand("fuse-train", "Train a fusion head on audio samples");
  std::string mode = "attention";
  bool needle = false;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr;
  path_opt(fuse_train, "train", p.train, "Training samples with audio");
  path_opt(fuse_train, "test", p.test, "Test samples with audio");
  path_opt(fuse_train, "output", p.output, "Params JSON");
  fuse_train->add_option("--mode", mode, "attention or avg_pool");
  fuse_train->add_flag("--needle", needle, "Use the generated needle-in-audio task");
  fuse_train->add_option("--epochs", epochs);
  fuse_train->add_option("--learning-rate", lr);
  fuse_train->add_option("--batch-size", batch_size);

  auto* fuse_eval = app.add_subcommand("fuse-eval", "Evaluate saved fusion params");
  path_opt(fuse_eval, "params", p.params, "Params JSON");
  path_opt(fuse_eval, "test", p.test, "Test samples with audio");
  fuse_eval->add_option("--mode", mode, "attention or avg_pool");

  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient check");
  std::size_t gc_batch = 4;
  double gc_step = 1e-4;
  path_opt(grad, "input", p.input, "Samples with audio");
  path_opt(grad, "params", p.params, "Params JSON (default: seeded init)");
  grad->add_option("--mode", mode, "attention or avg_pool");
  grad->add_option("--batch", gc_batch, "Samples used");
  grad->add_option("--step", gc_step, "Central-difference step");

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  std::vector<const char*> argv{"lsblt"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(common, p, format, out);
    if (score->parsed()) return cmd_score(common, p, strategy, budget, out);
    if (seeds->parsed()) return cmd_seeds(common, p, seed_threshold, seed_quantile, out);
    if (knn->parsed()) return cmd_knn(common, p, k, metric, out);
    if (lt_train->parsed()) {
      return cmd_lookalike_train(common, p, l2, negative_ratio, balance, out);
    }
    if (lt->parsed()) return cmd_lt_filter(common, p, lt_threshold, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(common, p, eval_inputs, targets, out);
    if (synth->parsed()) return cmd_synth(common, p, out);
    if (round->parsed()) return cmd_round(common, p, manual, out, err);
    if (loop->parsed()) return cmd_loop(common, p, rounds, out);
    if (fuse_train->parsed()) {
      return cmd_fuse_train(common, p, mode, needle, epochs, lr, batch_size, out);
    }
    if (fuse_eval->parsed()) return cmd_fuse_eval(common, p, mode, out);
    if (grad->parsed()) return cmd_grad_check(common, p, mode, gc_batch, gc_step, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n\n";
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& d : e.details()) err << "  " << d << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace lsblt::cli
