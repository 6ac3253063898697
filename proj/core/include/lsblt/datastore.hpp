#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lsblt {

inline constexpr double kSimplexTolerance = 1e-6;

// Precomputed audio encoder output for one item: T rows of width d_A.
using AudioRows = std::vector<std::vector<double>>;

struct SampleRecord {
  std::string id;
  std::vector<double> embedding;  // latent h (CLS hidden state), length d
  std::vector<double> probs;      // model output on the C-simplex
  std::optional<int> label;       // ordinal class in [0, C-1]
  std::optional<AudioRows> audio;
  std::optional<std::map<std::string, std::string>> tags;

  bool operator==(const SampleRecord&) const = default;
};

struct Dims {
  std::size_t embedding_dim = 0;
  std::size_t num_classes = 0;
  std::optional<std::size_t> audio_dim;

  bool operator==(const Dims&) const = default;
};

// Returns every violation of `record` against `dims`; empty means valid.
std::vector<std::string> validate_record(const SampleRecord& record, const Dims& dims);

// Immutable, validated collection of records with unique ids. Safe to share
// across threads once constructed.
class SampleSet {
 public:
  SampleSet() = default;

  // Validates every record and id uniqueness. Throws DataError listing all
  // violations.
  SampleSet(Dims dims, std::vector<SampleRecord> records);

  // Dims inferred from the first record (audio dim from the first record
  // that carries audio). An empty input yields an empty set with zero dims.
  static SampleSet infer(std::vector<SampleRecord> records);

  const Dims& dims() const noexcept { return dims_; }
  const std::vector<SampleRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const SampleRecord& operator[](std::size_t i) const { return records_[i]; }

  bool contains(std::string_view id) const;
  // nullptr when absent.
  const SampleRecord* find(std::string_view id) const;
  // Throws DataError when absent.
  const SampleRecord& at(std::string_view id) const;

  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

 private:
  void build_index();

  Dims dims_;
  std::vector<SampleRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Strategy { kRandom, kLeastConfident, kMargin, kMaxEntropy, kLsb, kLsbLt };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

struct SelectionEntry {
  std::string id;
  Strategy strategy = Strategy::kRandom;
  std::optional<double> score;
  std::optional<std::string> seed_id;
  std::optional<double> lookalike_score;

  bool operator==(const SelectionEntry&) const = default;
};

// One annotation work order. Entries carry their own strategy tag so mixed
// round batches stay attributable; `strategy` tags the batch as a whole.
struct SelectionBatch {
  int round = 0;
  Strategy strategy = Strategy::kRandom;
  std::vector<SelectionEntry> entries;

  std::vector<std::string> ids() const;
  bool operator==(const SelectionBatch&) const = default;
};

// Empty when ids are unique and non-empty.
std::vector<std::string> validate_batch(const SelectionBatch& batch);

enum class Format { kJsonl, kPacked };

Format parse_format(std::string_view s);

struct LoadOptions {
  Format format = Format::kJsonl;
  std::size_t threads = 1;
};

// jsonl: one record object per line. packed: `path` names the JSON manifest;
// float32 payload lives next to it (see docs/packed_format.md).
SampleSet load_samples(const std::filesystem::path& path, const LoadOptions& options = {});
SampleSet parse_samples_jsonl(std::string_view text, std::size_t threads = 1);

void write_samples(const SampleSet& set, const std::filesystem::path& path,
                   Format format = Format::kJsonl);
std::string samples_to_jsonl(const SampleSet& set);

// Keys per line: id, strategy, score, seed_id, lookalike_score.
void write_selection(const SelectionBatch& batch, const std::filesystem::path& path);
std::string selection_to_jsonl(const SelectionBatch& batch);
SelectionBatch read_selection(const std::filesystem::path& path, int round = 0);
SelectionBatch parse_selection_jsonl(std::string_view text, int round = 0);

}  // namespace lsblt
