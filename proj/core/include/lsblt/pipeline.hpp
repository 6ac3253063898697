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
#include "lsblt/latent_knn.hpp"
#include "lsblt/lookalike.hpp"
#include "lsblt/metrics.hpp"
#include "lsblt/reference_classifier.hpp"
#include "lsblt/synthetic.hpp"
#include "lsblt/uncertainty.hpp"

namespace lsblt {

struct Budgets {
  std::size_t random = 0;
  std::size_t statistical = 130;
  std::size_t lsb = 0;
  std::size_t lsb_lt = 30;

  std::size_t total() const noexcept { return random + statistical + lsb + lsb_lt; }
  bool operator==(const Budgets&) const = default;
};

struct RoundConfig {
  Budgets budgets;
  std::vector<double> statistical_mix{kDefaultStatisticalMix.begin(), kDefaultStatisticalMix.end()};
  SeedRule seed_rule;
  KnnConfig knn;
  double lt_threshold = 0.5;
  LookalikeConfig lookalike;
  // Matched examples kept per mismatch for lookalike training; <= 0 keeps all.
  double negative_ratio = 1.0;
  ReferenceConfig classifier;
  std::size_t rounds = 3;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::vector<double> targets = kDefaultPrecisionTargets;
};

// Throws DataError on out-of-range values.
void validate_round_config(const RoundConfig& config);

// JSON object with every RoundConfig field. Parsing starts from `base` and
// overrides only keys present; unknown keys raise DataError.
std::string to_json(const RoundConfig& config);
RoundConfig round_config_from_json(std::string_view text, const RoundConfig& base = {});

struct RoundStats {
  std::size_t seeds = 0;
  std::size_t lsb_candidates = 0;
  std::size_t lsb_lt_candidates = 0;
  std::size_t picked_random = 0;
  std::size_t picked_statistical = 0;
  std::size_t picked_lsb = 0;
  std::size_t picked_lsb_lt = 0;
  // Mean multiclass loss of the batch under the annotated labels, scored by
  // the classifier that selected it.
  double batch_loss = 0.0;

  bool operator==(const RoundStats&) const = default;
};

// Everything decided before annotation.
struct RoundSelection {
  int round = 0;
  SelectionBatch batch;
  SeedSet seeds;
  std::optional<LookalikeModel> lookalike;
  RoundStats stats;
  std::vector<std::string> warnings;
};

struct RoundRecord {
  int round = 0;
  SelectionBatch batch;
  std::optional<LookalikeModel> lookalike;
  EvalReport report;  // classifier retrained on the enlarged labeled set
  RoundStats stats;
  std::vector<std::string> warnings;
};

struct PipelineState {
  int round = 0;
  SampleSet labeled;                  // D_i
  SampleSet pool;                     // U_i
  std::map<std::string, int> oracle;  // withheld pool labels
  SampleSet heldout;
  ReferenceClassifier classifier;     // trained on D_i
  std::optional<LookalikeModel> lookalike;
  EvalReport baseline;                // classifier on D_0
  std::vector<RoundRecord> history;
};

// Trains the round-0 classifier and its held-out baseline report.
PipelineState initial_state(const SyntheticCorpus& corpus, const RoundConfig& config);

// Throws DataError when D and U overlap or history length != round.
void check_state(const PipelineState& state);

// Scores U with the current classifier, mines seeds from D, expands into U,
// trains the lookalike on D's match/mismatch labels, filters, and assembles
// the batch: LSB-LT (by lookalike score), LSB, statistical mix, random.
// Shortfalls in the LSB parts move to the statistical budget; a total above
// |U| is cut to |U|. Both are recorded as warnings.
RoundSelection select_round(const PipelineState& state, const RoundConfig& config);

// Moves the batch ids from U into D with `labels`, retrains the classifier and
// appends the round's report. Throws DataError on an id missing from U or
// from `labels`.
PipelineState apply_annotation(PipelineState state, RoundSelection selection,
                               const std::map<std::string, int>& labels,
                               const RoundConfig& config);

// select_round followed by apply_annotation with the withheld oracle labels.
PipelineState run_round(const PipelineState& state, const RoundConfig& config);

struct LoopResult {
  PipelineState state;
  std::vector<EvalReport> reports;  // one per round
};

// `rounds` applications of run_round. When `out_dir` is set, the corpus, every
// round's artifacts and a run log (starting with `config_echo`) are written
// there.
LoopResult run_loop(PipelineState state, const RoundConfig& config, std::size_t rounds,
                    const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                    std::string_view config_echo = {});

// Layout: corpus/{labeled,pool,heldout}.jsonl + corpus/oracle.jsonl,
// round_NNN/{batch.jsonl, lookalike.json, eval.json, summary.json}.
void persist_corpus(const PipelineState& state, const std::filesystem::path& dir);
void persist_round(const RoundRecord& record, const std::filesystem::path& dir);
std::filesystem::path round_dir(const std::filesystem::path& dir, int round);

// Batches persisted under `dir`, in round order.
std::vector<SelectionBatch> load_round_batches(const std::filesystem::path& dir);

// Re-applies persisted batches to the corpus; reproduces D, U, classifier and
// reports of the original run.
PipelineState replay(const SyntheticCorpus& corpus, const std::vector<SelectionBatch>& batches,
                     const RoundConfig& config);

// Mean oracle-label multiclass loss of the sets each strategy selects from the
// pool, with the corpus's snapshot probabilities. Random and statistical pick
// `budget` ids; LSB is the full expansion set and LSB-LT its filtered subset.
struct ComparisonConfig {
  std::size_t budget = 200;
  SeedRule seed_rule;
  KnnConfig knn;
  double lt_threshold = 0.5;
  LookalikeConfig lookalike;
  std::uint64_t seed = 0;
};

struct StrategyLosses {
  double random = 0.0;
  double statistical = 0.0;
  double lsb = 0.0;
  double lsb_lt = 0.0;
  std::size_t lsb_size = 0;
  std::size_t lsb_lt_size = 0;
};

StrategyLosses compare_strategies(const SyntheticCorpus& corpus, const ComparisonConfig& config);

}  // namespace lsblt
