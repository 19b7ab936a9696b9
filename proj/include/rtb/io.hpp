#pragma once

// Dataset file formats.
//
// Manifest (CSV, UTF-8, header row required):
//
//     sample_id,subject_id,modality,cohort,features
//
// The `features` column holds one of
//   * nothing or "-": the vector comes from the embeddings file;
//   * an inline vector, values separated by ';' (e.g. "0.1;0.25;-3");
//   * a path, relative to the manifest's directory, of a text file holding
//     whitespace- or comma-separated values.
//
// Embeddings (JSON Lines): a metadata line, then one record per sample.
//
//     {"schema":"rtb.embeddings/1","feature_dim":64}
//     {"sample_id":"subj001_RGB_neutral","features":[0.12,-1.5,...]}

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "rtb/data_model.hpp"
#include "rtb/error.hpp"
#include "rtb/synthetic.hpp"

namespace rtb {

inline constexpr const char* kEmbeddingsSchema = "rtb.embeddings/1";
inline constexpr const char* kDatasetSchema = "rtb.dataset/1";
inline constexpr const char* kManifestFile = "manifest.csv";
inline constexpr const char* kEmbeddingsFile = "embeddings.jsonl";
inline constexpr const char* kDatasetInfoFile = "dataset.json";

/// Filesystem problem (missing file, unwritable directory).
class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) lines.push_back(std::move(cur));
  return lines;
}

/// RFC 4180-style field splitting for a single line (no embedded newlines).
inline std::vector<std::string> split_csv(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

inline std::optional<double> parse_double(std::string_view token) {
  auto t = trim(token);
  if (t.empty()) return std::nullopt;
  const char* first = t.data();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

inline std::vector<double> parse_vector(const std::string& text, const std::string& separators,
                                        const std::string& what, std::size_t line_no) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto next = text.find_first_of(separators, pos);
    auto token = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (!trim(token).empty()) {
      auto v = parse_double(token);
      if (!v) throw ParseError(what + ": '" + trim(token) + "' is not a number", line_no);
      out.push_back(*v);
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

struct EmbeddingRow {
  std::string sample_id;
  std::vector<double> features;
  std::size_t line = 0;
};

struct EmbeddingsFile {
  std::size_t feature_dim = 0;
  std::vector<EmbeddingRow> rows;
};

inline EmbeddingsFile parse_embeddings(const std::string& text) {
  EmbeddingsFile out;
  bool have_header = false;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (detail::trim(lines[i]).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw ParseError("expected a JSON object", line_no);
    if (!have_header) {
      if (j.contains("schema") && j["schema"] != kEmbeddingsSchema)
        throw ParseError("unsupported embeddings schema " + j["schema"].dump(), line_no);
      if (!j.contains("feature_dim") || !j["feature_dim"].is_number_unsigned() || j["feature_dim"] == 0)
        throw ParseError("metadata line must declare a positive integer feature_dim", line_no);
      out.feature_dim = j["feature_dim"].get<std::size_t>();
      have_header = true;
      continue;
    }
    if (!j.contains("sample_id") || !j["sample_id"].is_string())
      throw ParseError("record needs a string sample_id", line_no);
    if (!j.contains("features") || !j["features"].is_array())
      throw ParseError("record needs a features array", line_no);
    EmbeddingRow row{j["sample_id"].get<std::string>(), {}, line_no};
    for (const auto& v : j["features"]) {
      if (!v.is_number()) throw ParseError("features must be numbers", line_no);
      row.features.push_back(v.get<double>());
    }
    out.rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError("embeddings file has no metadata line");
  return out;
}

inline EmbeddingsFile read_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(detail::read_file(path));
}

inline std::string format_embeddings(const DatasetManifest& manifest) {
  std::string out = nlohmann::json{{"schema", kEmbeddingsSchema}, {"feature_dim", manifest.feature_dim()}}.dump();
  out += '\n';
  for (const auto& s : manifest.samples()) {
    out += nlohmann::json{{"sample_id", s.sample_id}, {"features", s.features}}.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestRow {
  std::size_t line = 0;
  std::string sample_id;
  std::string subject_id;
  std::string modality;
  std::string cohort;
  std::string features;
};

inline std::vector<ManifestRow> parse_manifest_csv(const std::string& text) {
  static const std::vector<std::string> kColumns = {"sample_id", "subject_id", "modality", "cohort", "features"};
  const auto lines = detail::split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && detail::trim(lines[i]).empty()) ++i;
  if (i == lines.size()) throw ParseError("manifest is empty (header row required)");

  std::string header_line = lines[i];
  if (header_line.rfind("\xEF\xBB\xBF", 0) == 0) header_line.erase(0, 3);
  auto header = detail::split_csv(header_line, i + 1);
  std::vector<std::size_t> column_of(kColumns.size(), header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto name = detail::to_lower(detail::trim(header[c]));
    for (std::size_t k = 0; k < kColumns.size(); ++k)
      if (name == kColumns[k]) column_of[k] = c;
  }
  for (std::size_t k = 0; k < kColumns.size(); ++k)
    if (column_of[k] == header.size()) throw ParseError("header is missing column '" + kColumns[k] + "'", i + 1);

  std::vector<ManifestRow> rows;
  for (++i; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    auto fields = detail::split_csv(lines[i], i + 1);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       i + 1);
    rows.push_back(ManifestRow{i + 1, detail::trim(fields[column_of[0]]), detail::trim(fields[column_of[1]]),
                               detail::trim(fields[column_of[2]]), detail::trim(fields[column_of[3]]),
                               detail::trim(fields[column_of[4]])});
  }
  return rows;
}

/// Manifest with an empty features column; vectors go to the embeddings file.
inline std::string format_manifest_csv(const DatasetManifest& manifest) {
  std::string out = "sample_id,subject_id,modality,cohort,features\n";
  for (const auto& s : manifest.samples()) {
    out += detail::csv_field(s.sample_id) + ',' + detail::csv_field(s.subject_id) + ',' +
           detail::csv_field(s.modality.tag()) + ',' + detail::csv_field(s.cohort.name()) + ",\n";
  }
  return out;
}

/// Reads a manifest (and optional embeddings file) into a validated dataset.
/// In strict mode any rejected row raises ValidationError listing every
/// rejected row with its manifest line.
inline ManifestValidation load_dataset(const std::filesystem::path& manifest_path,
                                       const std::optional<std::filesystem::path>& embeddings_path,
                                       ManifestOptions options = {}) {
  auto rows = parse_manifest_csv(detail::read_file(manifest_path));
  if (rows.empty()) throw PreconditionError("manifest '" + manifest_path.string() + "' has no records");

  std::unordered_map<std::string, const EmbeddingRow*> by_id;
  std::vector<Diagnostic> rejected;
  EmbeddingsFile embeddings;
  if (embeddings_path) {
    embeddings = read_embeddings(*embeddings_path);
    if (!options.expected_dim) options.expected_dim = embeddings.feature_dim;
    for (const auto& r : embeddings.rows)
      if (!by_id.emplace(r.sample_id, &r).second)
        rejected.push_back({0, r.line, r.sample_id, "duplicate sample_id in embeddings file (line " +
                                                       std::to_string(r.line) + ")"});
  }

  const auto base_dir = manifest_path.parent_path();
  std::vector<SampleRecord> records;
  std::vector<std::size_t> line_of;
  for (const auto& row : rows) {
    auto reject = [&](std::string reason) {
      rejected.push_back({records.size(), row.line, row.sample_id, std::move(reason)});
    };
    SampleRecord rec;
    rec.sample_id = row.sample_id;
    rec.subject_id = row.subject_id;
    if (row.modality.empty() || row.cohort.empty()) {
      reject("empty modality or cohort");
      continue;
    }
    rec.modality = Modality(row.modality);
    rec.cohort = CohortLabel(row.cohort);

    if (row.features.empty() || row.features == "-") {
      auto it = by_id.find(row.sample_id);
      if (it == by_id.end()) {
        reject(embeddings_path ? "no embedding for this sample" : "no inline features and no embeddings file");
        continue;
      }
      rec.features = it->second->features;
    } else if (row.features.find(';') != std::string::npos || detail::parse_double(row.features)) {
      rec.features = detail::parse_vector(row.features, ";", "inline features", row.line);
    } else {
      auto path = base_dir / row.features;
      std::string content;
      try {
        content = detail::read_file(path);
      } catch (const IoError&) {
        throw ParseError("cannot read feature file '" + path.string() + "'", row.line);
      }
      rec.features = detail::parse_vector(content, " \t\r\n,", "feature file '" + path.string() + "'", row.line);
    }
    records.push_back(std::move(rec));
    line_of.push_back(row.line);
  }

  if (records.empty()) throw ValidationError(std::move(rejected));
  ManifestOptions lenient = options;
  lenient.strict = false;
  std::optional<ManifestValidation> result;
  try {
    result.emplace(validate_manifest(std::move(records), lenient));
  } catch (ValidationError& e) {
    auto diags = e.diagnostics();
    for (auto& d : diags) d.line = line_of.at(d.index);
    rejected.insert(rejected.end(), diags.begin(), diags.end());
    throw ValidationError(std::move(rejected));
  }
  for (auto d : result->rejected) {
    d.line = line_of.at(d.index);
    rejected.push_back(std::move(d));
  }
  std::stable_sort(rejected.begin(), rejected.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
  if (options.strict && !rejected.empty()) throw ValidationError(std::move(rejected));
  result->rejected = std::move(rejected);
  return std::move(*result);
}

// ---------------------------------------------------------------------------
// Dataset directory: manifest.csv + embeddings.jsonl + dataset.json
// ---------------------------------------------------------------------------

inline nlohmann::json dataset_info(const DatasetManifest& m) {
  nlohmann::json cohorts = nlohmann::json::array(), modalities = nlohmann::json::array();
  for (const auto& c : m.cohorts()) cohorts.push_back(c.name());
  for (const auto& x : m.modalities()) modalities.push_back(x.tag());
  return {{"schema", kDatasetSchema},   {"sample_count", m.size()}, {"subject_count", m.subject_count()},
          {"feature_dim", m.feature_dim()}, {"cohorts", cohorts},     {"modalities", modalities}};
}

inline void write_dataset_dir(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / kManifestFile, format_manifest_csv(manifest));
  detail::write_file(dir / kEmbeddingsFile, format_embeddings(manifest));
  detail::write_file(dir / kDatasetInfoFile, dataset_info(manifest).dump(2) + "\n");
}

inline DatasetManifest load_dataset_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory '" + dir.string() + "' does not exist");
  return load_dataset(dir / kManifestFile, dir / kEmbeddingsFile).manifest;
}

// ---------------------------------------------------------------------------
// Synthetic config (JSON)
// ---------------------------------------------------------------------------

inline SynthConfig parse_synth_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("synthetic config must be a JSON object");
  static const std::set<std::string> kKeys = {"subject_count", "cohorts",      "modalities",   "feature_dim",
                                              "subject_separation", "modality_correlation", "cohort_noise",
                                              "cohort_shift", "noise_sigma",  "seed"};
  for (const auto& [key, value] : j.items())
    if (kKeys.count(key) == 0) throw ParseError("unknown synthetic config key '" + key + "'");

  SynthConfig c;
  try {
    if (j.contains("subject_count")) c.subject_count = j["subject_count"].get<std::size_t>();
    if (j.contains("feature_dim")) c.feature_dim = j["feature_dim"].get<std::size_t>();
    if (j.contains("subject_separation")) c.subject_separation = j["subject_separation"].get<double>();
    if (j.contains("noise_sigma")) c.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("cohorts")) {
      c.cohorts.clear();
      for (const auto& v : j["cohorts"]) c.cohorts.emplace_back(v.get<std::string>());
    }
    if (j.contains("modalities")) {
      c.modalities.clear();
      for (const auto& v : j["modalities"]) c.modalities.emplace_back(v.get<std::string>());
    }
    if (j.contains("modality_correlation"))
      c.modality_correlation = j["modality_correlation"].get<std::vector<std::vector<double>>>();
    for (const char* key : {"cohort_noise", "cohort_shift"}) {
      if (!j.contains(key)) continue;
      auto& table = std::string(key) == "cohort_noise" ? c.cohort_noise : c.cohort_shift;
      for (const auto& [name, v] : j[key].items()) table[CohortLabel(name)] = v.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synthetic config: ") + e.what());
  }
  validate(c);
  return c;
}

inline SynthConfig read_synth_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("synthetic config: ") + e.what());
  }
  return parse_synth_config(j);
}

}  // namespace rtb
