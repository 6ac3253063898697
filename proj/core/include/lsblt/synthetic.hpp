#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsblt/datastore.hpp"

namespace lsblt {

// Audio rows attached to each record: one needle row carries the label signal,
// the rest are noise. The needle is keyed to the record's embedding, so an
// anchor that maps the embedding into audio space can find it.
struct AudioTaskSpec {
  std::size_t rows = 16;
  std::size_t audio_dim = 8;
  double key_strength = 4.0;
  double signal = 2.0;
  double noise = 1.0;
};

struct SyntheticCorpusConfig {
  std::uint64_t seed = 0;
  std::size_t dim = 16;
  std::size_t classes = 4;

  // Normal clusters; cluster k implies class k mod C. Explicit centers, when
  // given, override `clusters` and `center_scale`. Explicit spreads must match
  // the cluster count.
  std::size_t clusters = 12;
  double center_scale = 4.0;
  double spread = 1.0;
  std::vector<std::vector<double>> centers;
  std::vector<double> spreads;

  // Planted hard clusters sit `hard_offset * spread` away from a normal host
  // cluster. The scorer reads them as the host's class with high confidence,
  // while their labels are shifted by `hard_label_shift` (mod C).
  std::size_t hard_clusters = 2;
  double hard_fraction = 0.05;
  double hard_offset = 6.0;
  int hard_label_shift = 2;

  double label_noise = 0.02;

  // Generative scorer: logit_c = sharpness * log sum_{k: class c} exp(-e_k)
  // + noise, with e_k = |x - mu_k|^2 / (2 d sigma_k^2). Hard clusters are
  // invisible to it.
  double scorer_sharpness = 0.4;
  double scorer_noise = 0.6;

  std::size_t labeled_size = 400;
  std::size_t pool_size = 6000;
  std::size_t heldout_size = 1500;

  std::optional<AudioTaskSpec> audio;
};

struct SyntheticCorpus {
  SampleSet labeled;
  SampleSet pool;                    // labels withheld
  std::map<std::string, int> oracle;  // pool id -> withheld label
  SampleSet heldout;
};

// Every config field. Parsing overrides only keys
// present in `text`; unknown keys raise DataError.
std::string to_json(const SyntheticCorpusConfig& config);
SyntheticCorpusConfig corpus_config_from_json(std::string_view text,
                                              const SyntheticCorpusConfig& base = {});

// Deterministic given the config. Records carry tags "cluster" and
// "planted" ("1" for hard-cluster members). Ids are L/P/H plus a zero-padded
// index. Throws DataError on an inconsistent config.
SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& config);

// dir/{labeled,pool,heldout}.jsonl and dir/oracle.jsonl ({"id","label"} lines).
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);
SyntheticCorpus read_corpus(const std::filesystem::path& dir);

// Copy of `pool` with labels filled from `oracle`. Throws DataError on a
// missing id.
SampleSet with_oracle_labels(const SampleSet& pool, const std::map<std::string, int>& oracle);

// Needle-in-audio task: the CLS embedding is a random direction of norm
// `cls_strength`; the label lives only in the needle row. Probs are uniform.
struct NeedleTaskConfig {
  std::uint64_t seed = 0;
  std::size_t train_size = 2000;
  std::size_t test_size = 1000;
  std::size_t cls_dim = 8;
  double cls_strength = 4.0;
  std::size_t classes = 2;
  AudioTaskSpec audio;
};

struct NeedleTask {
  SampleSet train;
  SampleSet test;
};

NeedleTask generate_needle_task(const NeedleTaskConfig& config);

}  // namespace lsblt
