#include "lsblt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lsblt/error.hpp"
#include "lsblt/random.hpp"
#include "lsblt/vlmae.hpp"

namespace lsblt {
namespace {

std::string make_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06zu", prefix, i);
  return buf;
}

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double n2 = 0.0;
  while (n2 == 0.0) {
    n2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      n2 += x * x;
    }
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

// Maps an embedding to the needle key direction in audio space.
struct KeyMap {
  Matrix r;  // d_A x d; identity when square

  KeyMap(Rng& rng, std::size_t audio_dim, std::size_t dim) {
    if (audio_dim == dim) {
      r = Matrix::identity(dim);
    } else {
      r = Matrix(audio_dim, dim);
      const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
      for (auto& v : r.data) v = rng.normal(0.0, sd);
    }
  }

  std::vector<double> key(std::span<const double> h) const {
    std::vector<double> k(r.rows, 0.0);
    double n2 = 0.0;
    for (std::size_t i = 0; i < r.rows; ++i) {
      const auto row = r.row(i);
      for (std::size_t j = 0; j < r.cols; ++j) k[i] += row[j] * h[j];
      n2 += k[i] * k[i];
    }
    if (n2 > 0.0) {
      const double inv = 1.0 / std::sqrt(n2);
      for (auto& v : k) v *= inv;
    }
    return k;
  }
};

AudioRows make_audio(Rng& rng, const AudioTaskSpec& spec, const KeyMap& keys,
                     std::span<const double> signal_dir, std::span<const double> h, int label,
                     std::size_t classes) {
  AudioRows rows(spec.rows, std::vector<double>(spec.audio_dim));
  for (auto& row : rows) {
    for (auto& v : row) v = rng.normal(0.0, spec.noise);
  }
  const std::size_t needle = rng.index(spec.rows);
  const auto key = keys.key(h);
  const double centered = static_cast<double>(label) - 0.5 * static_cast<double>(classes - 1);
  for (std::size_t j = 0; j < spec.audio_dim; ++j) {
    rows[needle][j] += spec.key_strength * key[j] + spec.signal * centered * signal_dir[j];
  }
  return rows;
}

void check_audio_spec(const AudioTaskSpec& a) {
  if (a.rows == 0 || a.audio_dim == 0) throw DataError("audio task needs rows > 0 and audio_dim > 0");
  if (!(a.noise >= 0.0)) throw DataError("audio noise must be >= 0");
}

void check_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DataError(std::string("synthetic corpus: ") + name + " must be in [0, 1]");
  }
}

using Json = nlohmann::ordered_json;

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
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

}  // namespace

std::string to_json(const SyntheticCorpusConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["dim"] = c.dim;
  j["classes"] = c.classes;
  j["clusters"] = c.clusters;
  j["center_scale"] = c.center_scale;
  j["spread"] = c.spread;
  j["centers"] = c.centers;
  j["spreads"] = c.spreads;
  j["hard_clusters"] = c.hard_clusters;
  j["hard_fraction"] = c.hard_fraction;
  j["hard_offset"] = c.hard_offset;
  j["hard_label_shift"] = c.hard_label_shift;
  j["label_noise"] = c.label_noise;
  j["scorer_sharpness"] = c.scorer_sharpness;
  j["scorer_noise"] = c.scorer_noise;
  j["labeled_size"] = c.labeled_size;
  j["pool_size"] = c.pool_size;
  j["heldout_size"] = c.heldout_size;
  if (c.audio) {
    j["audio"] = {{"rows", c.audio->rows},
                  {"audio_dim", c.audio->audio_dim},
                  {"key_strength", c.audio->key_strength},
                  {"signal", c.audio->signal},
                  {"noise", c.audio->noise}};
  } else {
    j["audio"] = nullptr;
  }
  return j.dump(2);
}

SyntheticCorpusConfig corpus_config_from_json(std::string_view text,
                                              const SyntheticCorpusConfig& base) {
  SyntheticCorpusConfig c = base;
  try {
    const Json j = Json::parse(text);
    check_keys(j,
               {"seed", "dim", "classes", "clusters", "center_scale", "spread", "centers",
                "spreads", "hard_clusters", "hard_fraction", "hard_offset", "hard_label_shift",
                "label_noise", "scorer_sharpness", "scorer_noise", "labeled_size", "pool_size",
                "heldout_size", "audio"},
               "corpus config");
    read_if(j, "seed", c.seed);
    read_if(j, "dim", c.dim);
    read_if(j, "classes", c.classes);
    read_if(j, "clusters", c.clusters);
    read_if(j, "center_scale", c.center_scale);
    read_if(j, "spread", c.spread);
    read_if(j, "centers", c.centers);
    read_if(j, "spreads", c.spreads);
    read_if(j, "hard_clusters", c.hard_clusters);
    read_if(j, "hard_fraction", c.hard_fraction);
    read_if(j, "hard_offset", c.hard_offset);
    read_if(j, "hard_label_shift", c.hard_label_shift);
    read_if(j, "label_noise", c.label_noise);
    read_if(j, "scorer_sharpness", c.scorer_sharpness);
    read_if(j, "scorer_noise", c.scorer_noise);
    read_if(j, "labeled_size", c.labeled_size);
    read_if(j, "pool_size", c.pool_size);
    read_if(j, "heldout_size", c.heldout_size);
    if (j.contains("audio")) {
      const auto& a = j.at("audio");
      if (a.is_null()) {
        c.audio.reset();
      } else {
        check_keys(a, {"rows", "audio_dim", "key_strength", "signal", "noise"}, "corpus audio");
        AudioTaskSpec spec = c.audio.value_or(AudioTaskSpec{});
        read_if(a, "rows", spec.rows);
        read_if(a, "audio_dim", spec.audio_dim);
        read_if(a, "key_strength", spec.key_strength);
        read_if(a, "signal", spec.signal);
        read_if(a, "noise", spec.noise);
        c.audio = spec;
      }
    }
  } catch (const Json::exception& e) {
    throw DataError(std::string("corpus config: ") + e.what());
  }
  return c;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& config) {
  const std::size_t d = config.dim;
  const std::size_t C = config.classes;
  if (d == 0) throw DataError("synthetic corpus: dim must be > 0");
  if (C < 2) throw DataError("synthetic corpus: need at least 2 classes");
  check_fraction(config.hard_fraction, "hard_fraction");
  check_fraction(config.label_noise, "label_noise");
  if (!(config.spread > 0.0)) throw DataError("synthetic corpus: spread must be > 0");
  if (config.labeled_size == 0) throw DataError("synthetic corpus: labeled_size must be > 0");

  Rng rng(config.seed);

  std::vector<std::vector<double>> centers = config.centers;
  if (centers.empty()) {
    centers.resize(config.clusters);
    for (auto& c : centers) {
      c.resize(d);
      for (auto& v : c) v = rng.normal(0.0, config.center_scale);
    }
  }
  const std::size_t K = centers.size();
  if (K < 2) throw DataError("synthetic corpus: need at least 2 clusters");
  for (const auto& c : centers) {
    if (c.size() != d) throw DataError("synthetic corpus: center dimension != dim");
  }
  std::vector<double> spreads = config.spreads;
  if (spreads.empty()) spreads.assign(K, config.spread);
  if (spreads.size() != K) throw DataError("synthetic corpus: spreads count != cluster count");
  for (double s : spreads) {
    if (!(s > 0.0)) throw DataError("synthetic corpus: spreads must be > 0");
  }
  if (config.hard_fraction > 0.0 && config.hard_clusters == 0) {
    throw DataError("synthetic corpus: hard_fraction > 0 needs hard_clusters > 0");
  }
  if (config.hard_clusters > K) {
    throw DataError("synthetic corpus: more hard clusters than normal clusters");
  }
  if (config.audio) check_audio_spec(*config.audio);

  auto implied = [&](std::size_t k) { return static_cast<int>(k % C); };

  // Hard clusters: distinct hosts, random offset direction.
  std::vector<std::size_t> hosts(K);
  for (std::size_t k = 0; k < K; ++k) hosts[k] = k;
  rng.shuffle(hosts);
  hosts.resize(config.hard_clusters);
  std::vector<std::vector<double>> hard_centers;
  std::vector<int> hard_labels;
  std::vector<double> hard_spreads;
  for (std::size_t h : hosts) {
    const auto dir = random_unit(rng, d);
    std::vector<double> c = centers[h];
    for (std::size_t j = 0; j < d; ++j) c[j] += config.hard_offset * spreads[h] * dir[j];
    hard_centers.push_back(std::move(c));
    const int shift = ((config.hard_label_shift % static_cast<int>(C)) + static_cast<int>(C)) %
                      static_cast<int>(C);
    hard_labels.push_back((implied(h) + shift) % static_cast<int>(C));
    hard_spreads.push_back(spreads[h]);
  }

  std::optional<KeyMap> keys;
  std::vector<double> signal_dir;
  if (config.audio) {
    keys.emplace(rng, config.audio->audio_dim, d);
    signal_dir = random_unit(rng, config.audio->audio_dim);
  }

  auto scorer = [&](std::span<const double> x, Rng& r) {
    std::vector<double> logits(C);
    std::vector<std::vector<double>> terms(C);
    for (std::size_t k = 0; k < K; ++k) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x[j] - centers[k][j];
        d2 += diff * diff;
      }
      terms[k % C].push_back(-d2 / (2.0 * static_cast<double>(d) * spreads[k] * spreads[k]));
    }
    for (std::size_t c = 0; c < C; ++c) {
      double m = -INFINITY;
      for (double t : terms[c]) m = std::max(m, t);
      double s = 0.0;
      for (double t : terms[c]) s += std::exp(t - m);
      const double lse = terms[c].empty() ? -1e9 : m + std::log(s);
      logits[c] = config.scorer_sharpness * lse + config.scorer_noise * r.normal();
    }
    return softmax(logits);
  };

  auto draw = [&](char prefix, std::size_t n, bool withhold,
                  std::map<std::string, int>* oracle) {
    std::vector<SampleRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      SampleRecord r;
      r.id = make_id(prefix, i);
      const bool planted = !hard_centers.empty() && rng.bernoulli(config.hard_fraction);
      const std::vector<double>* mu;
      double sd;
      int label;
      std::size_t cluster;
      if (planted) {
        cluster = rng.index(hard_centers.size());
        mu = &hard_centers[cluster];
        sd = hard_spreads[cluster];
        label = hard_labels[cluster];
        cluster += K;
      } else {
        cluster = rng.index(K);
        mu = &centers[cluster];
        sd = spreads[cluster];
        label = implied(cluster);
      }
      r.embedding.resize(d);
      for (std::size_t j = 0; j < d; ++j) r.embedding[j] = (*mu)[j] + sd * rng.normal();
      if (rng.bernoulli(config.label_noise)) {
        label = (label + 1 + static_cast<int>(rng.index(C - 1))) % static_cast<int>(C);
      }
      r.probs = scorer(r.embedding, rng);
      if (config.audio) {
        r.audio = make_audio(rng, *config.audio, *keys, signal_dir, r.embedding, label, C);
      }
      r.tags = std::map<std::string, std::string>{{"cluster", std::to_string(cluster)},
                                                  {"planted", planted ? "1" : "0"}};
      if (withhold) {
        (*oracle)[r.id] = label;
      } else {
        r.label = label;
      }
      records.push_back(std::move(r));
    }
    Dims dims{d, C, std::nullopt};
    if (config.audio) dims.audio_dim = config.audio->audio_dim;
    return SampleSet(dims, std::move(records));
  };

  SyntheticCorpus corpus;
  corpus.labeled = draw('L', config.labeled_size, false, nullptr);
  corpus.pool = draw('P', config.pool_size, true, &corpus.oracle);
  corpus.heldout = draw('H', config.heldout_size, false, nullptr);
  return corpus;
}

SampleSet with_oracle_labels(const SampleSet& pool, const std::map<std::string, int>& oracle) {
  std::vector<SampleRecord> records(pool.records());
  for (auto& r : records) {
    const auto it = oracle.find(r.id);
    if (it == oracle.end()) throw DataError("no oracle label for '" + r.id + "'");
    r.label = it->second;
  }
  return SampleSet(pool.dims(), std::move(records));
}

void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_samples(corpus.labeled, dir / "labeled.jsonl");
  write_samples(corpus.pool, dir / "pool.jsonl");
  write_samples(corpus.heldout, dir / "heldout.jsonl");
  std::ofstream out(dir / "oracle.jsonl", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + (dir / "oracle.jsonl").string() + "'");
  for (const auto& [id, label] : corpus.oracle) {
    out << Json{{"id", id}, {"label", label}}.dump() << '\n';
  }
}

SyntheticCorpus read_corpus(const std::filesystem::path& dir) {
  SyntheticCorpus c;
  c.labeled = load_samples(dir / "labeled.jsonl");
  c.pool = load_samples(dir / "pool.jsonl");
  c.heldout = load_samples(dir / "heldout.jsonl");
  std::ifstream in(dir / "oracle.jsonl", std::ios::binary);
  if (!in) throw DataError("cannot open '" + (dir / "oracle.jsonl").string() + "'");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      c.oracle[j.at("id").get<std::string>()] = j.at("label").get<int>();
    } catch (const Json::exception& e) {
      throw DataError("oracle.jsonl line " + std::to_string(n) + ": " + e.what());
    }
  }
  return c;
}

NeedleTask generate_needle_task(const NeedleTaskConfig& config) {
  if (config.cls_dim == 0) throw DataError("needle task: cls_dim must be > 0");
  if (config.classes < 2) throw DataError("needle task: need at least 2 classes");
  if (config.train_size == 0 || config.test_size == 0) {
    throw DataError("needle task: train and test sizes must be > 0");
  }
  check_audio_spec(config.audio);
  Rng rng(config.seed);
  const KeyMap keys(rng, config.audio.audio_dim, config.cls_dim);
  const auto signal_dir = random_unit(rng, config.audio.audio_dim);
  const std::vector<double> uniform(config.classes, 1.0 / static_cast<double>(config.classes));

  auto draw = [&](char prefix, std::size_t n) {
    std::vector<SampleRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      SampleRecord r;
      r.id = make_id(prefix, i);
      r.embedding = random_unit(rng, config.cls_dim);
      for (auto& v : r.embedding) v *= config.cls_strength;
      const int label = static_cast<int>(rng.index(config.classes));
      r.label = label;
      r.probs = uniform;
      r.audio = make_audio(rng, config.audio, keys, signal_dir, r.embedding, label, config.classes);
      records.push_back(std::move(r));
    }
    return SampleSet(Dims{config.cls_dim, config.classes, config.audio.audio_dim},
                     std::move(records));
  };

  NeedleTask task;
  task.train = draw('T', config.train_size);
  task.test = draw('E', config.test_size);
  return task;
}

}  // namespace lsblt
