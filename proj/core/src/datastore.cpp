#include "lsblt/datastore.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "lsblt/error.hpp"
#include "lsblt/parallel.hpp"

namespace lsblt {
namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kPackedFormatTag = "lsblt-packed";
constexpr int kPackedVersion = 1;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

std::vector<double> number_array(const Json& j, const char* field) {
  if (!j.is_array()) throw DataError(std::string(field) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw DataError(std::string(field) + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

SampleRecord record_from_json(const Json& j) {
  if (!j.is_object()) throw DataError("record must be a JSON object");
  static const std::set<std::string> known = {"id", "embedding", "probs", "label", "audio", "tags"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw DataError("unknown key '" + key + "'");
  }
  SampleRecord r;
  if (!j.contains("id") || !j["id"].is_string()) throw DataError("id must be a string");
  r.id = j["id"].get<std::string>();
  if (!j.contains("embedding")) throw DataError("missing embedding");
  r.embedding = number_array(j["embedding"], "embedding");
  if (!j.contains("probs")) throw DataError("missing probs");
  r.probs = number_array(j["probs"], "probs");
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_number_integer()) throw DataError("label must be an integer or null");
    r.label = j["label"].get<int>();
  }
  if (j.contains("audio") && !j["audio"].is_null()) {
    if (!j["audio"].is_array()) throw DataError("audio must be an array of rows");
    AudioRows rows;
    for (const auto& row : j["audio"]) rows.push_back(number_array(row, "audio row"));
    r.audio = std::move(rows);
  }
  if (j.contains("tags") && !j["tags"].is_null()) {
    if (!j["tags"].is_object()) throw DataError("tags must be an object");
    std::map<std::string, std::string> tags;
    for (const auto& [k, v] : j["tags"].items()) {
      if (!v.is_string()) throw DataError("tag values must be strings");
      tags[k] = v.get<std::string>();
    }
    r.tags = std::move(tags);
  }
  return r;
}

Json record_to_json(const SampleRecord& r) {
  Json j;
  j["id"] = r.id;
  j["embedding"] = r.embedding;
  j["probs"] = r.probs;
  j["label"] = r.label ? Json(*r.label) : Json(nullptr);
  j["audio"] = r.audio ? Json(*r.audio) : Json(nullptr);
  if (r.tags) {
    Json tags = Json::object();
    for (const auto& [k, v] : *r.tags) tags[k] = v;
    j["tags"] = std::move(tags);
  } else {
    j["tags"] = nullptr;
  }
  return j;
}

Dims infer_dims(const std::vector<SampleRecord>& records) {
  Dims dims;
  if (records.empty()) return dims;
  dims.embedding_dim = records.front().embedding.size();
  dims.num_classes = records.front().probs.size();
  for (const auto& r : records) {
    if (r.audio && !r.audio->empty()) {
      dims.audio_dim = r.audio->front().size();
      break;
    }
  }
  return dims;
}

// float32 payload helpers; the on-disk layout is little-endian regardless of host.
void put_f32(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

double get_f32(std::string_view in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw DataError("packed payload truncated");
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += 4;
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::filesystem::path payload_path_for(const std::filesystem::path& manifest) {
  return manifest.parent_path() / (manifest.stem().string() + ".f32");
}

SampleSet load_packed(const std::filesystem::path& manifest_path) {
  Json m;
  try {
    m = Json::parse(read_file(manifest_path));
  } catch (const Json::exception& e) {
    throw DataError("packed manifest '" + manifest_path.string() + "': " + e.what());
  }
  try {
    if (m.at("format").get<std::string>() != kPackedFormatTag) {
      throw DataError("not an lsblt packed manifest");
    }
    if (m.at("version").get<int>() != kPackedVersion) {
      throw DataError("unsupported packed version");
    }
    Dims dims;
    dims.embedding_dim = m.at("dims").at("embedding").get<std::size_t>();
    dims.num_classes = m.at("dims").at("classes").get<std::size_t>();
    if (!m.at("dims").at("audio").is_null()) {
      dims.audio_dim = m.at("dims").at("audio").get<std::size_t>();
    }
    const auto count = m.at("count").get<std::size_t>();
    const auto& entries = m.at("records");
    if (entries.size() != count) throw DataError("manifest count does not match record table");
    const std::string payload =
        read_file(manifest_path.parent_path() / m.at("payload").get<std::string>());

    std::vector<SampleRecord> records;
    records.reserve(count);
    std::size_t pos = 0;
    for (const auto& e : entries) {
      SampleRecord r;
      r.id = e.at("id").get<std::string>();
      r.embedding.resize(dims.embedding_dim);
      for (auto& v : r.embedding) v = get_f32(payload, pos);
      r.probs.resize(dims.num_classes);
      for (auto& v : r.probs) v = get_f32(payload, pos);
      if (!e.at("label").is_null()) r.label = e.at("label").get<int>();
      if (!e.at("audio_rows").is_null()) {
        const auto rows = e.at("audio_rows").get<std::size_t>();
        if (rows > 0 && !dims.audio_dim) throw DataError("audio rows without declared audio dim");
        AudioRows audio(rows, std::vector<double>(dims.audio_dim.value_or(0)));
        for (auto& row : audio) {
          for (auto& v : row) v = get_f32(payload, pos);
        }
        r.audio = std::move(audio);
      }
      if (!e.at("tags").is_null()) {
        r.tags = e.at("tags").get<std::map<std::string, std::string>>();
      }
      records.push_back(std::move(r));
    }
    if (pos != payload.size()) throw DataError("packed payload has trailing bytes");
    return SampleSet(dims, std::move(records));
  } catch (const Json::exception& e) {
    throw DataError("packed manifest '" + manifest_path.string() + "': " + e.what());
  }
}

void write_packed(const SampleSet& set, const std::filesystem::path& manifest_path) {
  const Dims& dims = set.dims();
  std::string payload;
  Json records = Json::array();
  for (const auto& r : set) {
    for (double v : r.embedding) put_f32(payload, v);
    for (double v : r.probs) put_f32(payload, v);
    Json e;
    e["id"] = r.id;
    e["label"] = r.label ? Json(*r.label) : Json(nullptr);
    if (r.audio) {
      e["audio_rows"] = r.audio->size();
      for (const auto& row : *r.audio) {
        for (double v : row) put_f32(payload, v);
      }
    } else {
      e["audio_rows"] = nullptr;
    }
    if (r.tags) {
      Json tags = Json::object();
      for (const auto& [k, v] : *r.tags) tags[k] = v;
      e["tags"] = std::move(tags);
    } else {
      e["tags"] = nullptr;
    }
    records.push_back(std::move(e));
  }
  const auto payload_path = payload_path_for(manifest_path);
  Json m;
  m["format"] = kPackedFormatTag;
  m["version"] = kPackedVersion;
  m["dims"] = {{"embedding", dims.embedding_dim},
               {"classes", dims.num_classes},
               {"audio", dims.audio_dim ? Json(*dims.audio_dim) : Json(nullptr)}};
  m["count"] = set.size();
  m["payload"] = payload_path.filename().string();
  m["records"] = std::move(records);
  write_file(payload_path, payload);
  write_file(manifest_path, m.dump(2) + "\n");
}

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

std::vector<std::string> validate_record(const SampleRecord& record, const Dims& dims) {
  std::vector<std::string> errors;
  const std::string who = "record '" + record.id + "': ";
  if (record.id.empty()) errors.push_back("record has empty id");
  if (record.embedding.size() != dims.embedding_dim) {
    errors.push_back(who + "embedding length " + std::to_string(record.embedding.size()) +
                     " != declared " + std::to_string(dims.embedding_dim));
  }
  for (double v : record.embedding) {
    if (!std::isfinite(v)) {
      errors.push_back(who + "embedding has non-finite entry");
      break;
    }
  }
  if (record.probs.size() != dims.num_classes) {
    errors.push_back(who + "probs length " + std::to_string(record.probs.size()) +
                     " != declared " + std::to_string(dims.num_classes));
  }
  bool finite = true;
  bool negative = false;
  double sum = 0.0;
  for (double p : record.probs) {
    if (!std::isfinite(p)) finite = false;
    if (p < 0.0) negative = true;
    sum += p;
  }
  if (!finite) {
    errors.push_back(who + "probs has non-finite entry");
  } else {
    if (negative) errors.push_back(who + "probs has negative entry");
    if (!record.probs.empty() && std::abs(sum - 1.0) > kSimplexTolerance) {
      errors.push_back(who + "probs not normalized (sum " + std::to_string(sum) + ")");
    }
  }
  if (record.label) {
    if (*record.label < 0 || static_cast<std::size_t>(*record.label) >= dims.num_classes) {
      errors.push_back(who + "label " + std::to_string(*record.label) + " outside [0, " +
                       std::to_string(dims.num_classes) + ")");
    }
  }
  if (record.audio) {
    if (!dims.audio_dim) {
      errors.push_back(who + "audio present but corpus declares no audio dim");
    } else {
      for (const auto& row : *record.audio) {
        if (row.size() != *dims.audio_dim) {
          errors.push_back(who + "audio row length " + std::to_string(row.size()) +
                           " != declared " + std::to_string(*dims.audio_dim));
          break;
        }
      }
    }
  }
  return errors;
}

SampleSet::SampleSet(Dims dims, std::vector<SampleRecord> records)
    : dims_(dims), records_(std::move(records)) {
  std::vector<std::string> errors;
  std::unordered_set<std::string_view> seen;
  for (const auto& r : records_) {
    auto errs = validate_record(r, dims_);
    errors.insert(errors.end(), errs.begin(), errs.end());
    if (!seen.insert(r.id).second) errors.push_back("duplicate id '" + r.id + "'");
  }
  if (!errors.empty()) {
    std::string what = "invalid sample set: " + errors.front();
    throw DataError(std::move(what), std::move(errors));
  }
  build_index();
}

SampleSet SampleSet::infer(std::vector<SampleRecord> records) {
  const Dims dims = infer_dims(records);
  return SampleSet(dims, std::move(records));
}

void SampleSet::build_index() {
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) index_.emplace(records_[i].id, i);
}

bool SampleSet::contains(std::string_view id) const { return find(id) != nullptr; }

const SampleRecord* SampleSet::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

const SampleRecord& SampleSet::at(std::string_view id) const {
  const SampleRecord* r = find(id);
  if (!r) throw DataError("unknown id '" + std::string(id) + "'");
  return *r;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kRandom: return "random";
    case Strategy::kLeastConfident: return "least_confident";
    case Strategy::kMargin: return "margin";
    case Strategy::kMaxEntropy: return "max_entropy";
    case Strategy::kLsb: return "lsb";
    case Strategy::kLsbLt: return "lsb_lt";
  }
  return "random";
}

Strategy parse_strategy(std::string_view s) {
  for (Strategy v : {Strategy::kRandom, Strategy::kLeastConfident, Strategy::kMargin,
                     Strategy::kMaxEntropy, Strategy::kLsb, Strategy::kLsbLt}) {
    if (to_string(v) == s) return v;
  }
  throw DataError("unknown strategy '" + std::string(s) + "'");
}

std::vector<std::string> SelectionBatch::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

std::vector<std::string> validate_batch(const SelectionBatch& batch) {
  std::vector<std::string> errors;
  std::unordered_set<std::string_view> seen;
  for (const auto& e : batch.entries) {
    if (e.id.empty()) errors.push_back("batch entry with empty id");
    if (!seen.insert(e.id).second) errors.push_back("duplicate id '" + e.id + "' in batch");
  }
  return errors;
}

Format parse_format(std::string_view s) {
  if (s == "jsonl") return Format::kJsonl;
  if (s == "packed") return Format::kPacked;
  throw DataError("unknown format '" + std::string(s) + "'");
}

SampleSet parse_samples_jsonl(std::string_view text, std::size_t threads) {
  const auto lines = split_lines(text);
  std::vector<std::optional<SampleRecord>> parsed(lines.size());
  std::vector<std::string> line_errors(lines.size());

  parallel_chunks(lines.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (blank(lines[i])) continue;
      try {
        parsed[i] = record_from_json(Json::parse(lines[i]));
      } catch (const std::exception& e) {
        line_errors[i] = "line " + std::to_string(i + 1) + ": " + e.what();
      }
    }
  });

  std::vector<std::string> errors;
  for (auto& e : line_errors) {
    if (!e.empty()) errors.push_back(std::move(e));
  }
  if (!errors.empty()) {
    std::string what = "malformed input: " + errors.front();
    throw DataError(std::move(what), std::move(errors));
  }

  std::vector<SampleRecord> records;
  records.reserve(parsed.size());
  for (auto& p : parsed) {
    if (p) records.push_back(std::move(*p));
  }
  return SampleSet::infer(std::move(records));
}

SampleSet load_samples(const std::filesystem::path& path, const LoadOptions& options) {
  if (options.format == Format::kPacked) return load_packed(path);
  return parse_samples_jsonl(read_file(path), options.threads);
}

std::string samples_to_jsonl(const SampleSet& set) {
  std::string out;
  for (const auto& r : set) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_samples(const SampleSet& set, const std::filesystem::path& path, Format format) {
  if (format == Format::kPacked) {
    write_packed(set, path);
    return;
  }
  write_file(path, samples_to_jsonl(set));
}

std::string selection_to_jsonl(const SelectionBatch& batch) {
  if (auto errs = validate_batch(batch); !errs.empty()) {
    std::string what = "invalid selection batch: " + errs.front();
    throw DataError(std::move(what), std::move(errs));
  }
  std::string out;
  for (const auto& e : batch.entries) {
    Json j;
    j["id"] = e.id;
    j["strategy"] = to_string(e.strategy);
    j["score"] = optional_number(e.score);
    j["seed_id"] = e.seed_id ? Json(*e.seed_id) : Json(nullptr);
    j["lookalike_score"] = optional_number(e.lookalike_score);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_selection(const SelectionBatch& batch, const std::filesystem::path& path) {
  write_file(path, selection_to_jsonl(batch));
}

SelectionBatch parse_selection_jsonl(std::string_view text, int round) {
  SelectionBatch batch;
  batch.round = round;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    try {
      const Json j = Json::parse(lines[i]);
      SelectionEntry e;
      e.id = j.at("id").get<std::string>();
      e.strategy = parse_strategy(j.at("strategy").get<std::string>());
      if (j.contains("score") && !j["score"].is_null()) e.score = j["score"].get<double>();
      if (j.contains("seed_id") && !j["seed_id"].is_null()) {
        e.seed_id = j["seed_id"].get<std::string>();
      }
      if (j.contains("lookalike_score") && !j["lookalike_score"].is_null()) {
        e.lookalike_score = j["lookalike_score"].get<double>();
      }
      batch.entries.push_back(std::move(e));
    } catch (const std::exception& e) {
      throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (!batch.entries.empty()) batch.strategy = batch.entries.front().strategy;
  if (auto errs = validate_batch(batch); !errs.empty()) {
    std::string what = "invalid selection batch: " + errs.front();
    throw DataError(std::move(what), std::move(errs));
  }
  return batch;
}

SelectionBatch read_selection(const std::filesystem::path& path, int round) {
  return parse_selection_jsonl(read_file(path), round);
}

}  // namespace lsblt
