#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rtb/error.hpp"

namespace rtb {

namespace detail {

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

inline std::string to_upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline std::string to_lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Imaging band of a sample. Tags are case-insensitive on input and stored
/// uppercase. Any non-empty tag is accepted; the four bands the toolkit knows
/// about sort first, in the order RGB, NIR, IR, SKETCH.
class Modality {
 public:
  Modality() = default;
  explicit Modality(std::string_view tag) : tag_(detail::to_upper(detail::trim(tag))) {
    if (tag_.empty()) throw InvariantError("modality tag must be non-empty");
  }

  static Modality rgb() { return Modality("RGB"); }
  static Modality nir() { return Modality("NIR"); }
  static Modality ir() { return Modality("IR"); }
  static Modality sketch() { return Modality("SKETCH"); }

  const std::string& tag() const noexcept { return tag_; }
  bool is_known() const noexcept { return known_rank() < 4; }

  friend bool operator==(const Modality&, const Modality&) = default;
  friend std::strong_ordering operator<=>(const Modality& a, const Modality& b) {
    if (auto c = a.known_rank() <=> b.known_rank(); c != 0) return c;
    return a.tag_ <=> b.tag_;
  }

 private:
  int known_rank() const noexcept {
    static constexpr std::string_view kKnown[] = {"RGB", "NIR", "IR", "SKETCH"};
    for (int i = 0; i < 4; ++i)
      if (tag_ == kKnown[i]) return i;
    return 4;
  }

  std::string tag_;
};

/// A cohort (e.g. a facial expression). Non-empty, canonical lowercase.
/// Canonical label order is plain lexicographic order on the lowercase name.
class CohortLabel {
 public:
  CohortLabel() = default;
  explicit CohortLabel(std::string_view name) : name_(detail::to_lower(detail::trim(name))) {
    if (name_.empty()) throw InvariantError("cohort label must be non-empty");
  }

  const std::string& name() const noexcept { return name_; }

  friend auto operator<=>(const CohortLabel&, const CohortLabel&) = default;

 private:
  std::string name_;
};

struct SampleRecord {
  std::string sample_id;
  std::string subject_id;
  Modality modality;
  CohortLabel cohort;
  std::vector<double> features;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct ManifestOptions {
  /// Maximum number of samples per (subject, modality, cohort); 0 = unlimited.
  std::size_t max_per_combination = 0;
  /// Dimension every feature vector must have. When unset, the first
  /// accepted record fixes it.
  std::optional<std::size_t> expected_dim;
  /// Throw ValidationError on any rejected record (default), or drop the
  /// rejected rows and report them.
  bool strict = true;
};

class DatasetManifest;

struct ManifestValidation;

ManifestValidation validate_manifest(std::vector<SampleRecord> raw_records,
                                     const ManifestOptions& options = {});

/// A validated, immutable set of samples. Samples are held in sample_id
/// order so every downstream computation is independent of input order.
class DatasetManifest {
 public:
  const std::vector<SampleRecord>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t subject_count() const noexcept { return subjects_.size(); }
  std::size_t feature_dim() const noexcept { return feature_dim_; }

  /// Distinct subject ids, sorted.
  const std::vector<std::string>& subjects() const noexcept { return subjects_; }
  /// Distinct cohorts, canonical order.
  const std::vector<CohortLabel>& cohorts() const noexcept { return cohorts_; }
  /// Distinct modalities, canonical order.
  const std::vector<Modality>& modalities() const noexcept { return modalities_; }

  /// Subset of samples matching `keep`. Throws PreconditionError when
  /// nothing survives, since a manifest is never empty.
  template <class Predicate>
  DatasetManifest filter(Predicate keep) const {
    std::vector<SampleRecord> kept;
    for (const auto& s : samples_)
      if (keep(s)) kept.push_back(s);
    if (kept.empty()) throw PreconditionError("filter leaves the manifest empty");
    return DatasetManifest(std::move(kept), feature_dim_);
  }

  DatasetManifest select_modality(const Modality& m) const {
    return filter([&](const SampleRecord& s) { return s.modality == m; });
  }

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.feature_dim_ == b.feature_dim_ && a.samples_ == b.samples_;
  }

 private:
  friend ManifestValidation validate_manifest(std::vector<SampleRecord>, const ManifestOptions&);

  DatasetManifest(std::vector<SampleRecord> sorted_samples, std::size_t dim)
      : samples_(std::move(sorted_samples)), feature_dim_(dim) {
    std::set<std::string> subjects;
    std::set<CohortLabel> cohorts;
    std::set<Modality> modalities;
    for (const auto& s : samples_) {
      subjects.insert(s.subject_id);
      cohorts.insert(s.cohort);
      modalities.insert(s.modality);
    }
    subjects_.assign(subjects.begin(), subjects.end());
    cohorts_.assign(cohorts.begin(), cohorts.end());
    modalities_.assign(modalities.begin(), modalities.end());
  }

  std::vector<SampleRecord> samples_;
  std::size_t feature_dim_ = 0;
  std::vector<std::string> subjects_;
  std::vector<CohortLabel> cohorts_;
  std::vector<Modality> modalities_;
};

struct ManifestValidation {
  DatasetManifest manifest;
  std::vector<Diagnostic> rejected;
};

/// Checks every record against the manifest invariants. Records are examined
/// in input order; the first accepted record fixes the feature dimension
/// unless `options.expected_dim` is set.
inline ManifestValidation validate_manifest(std::vector<SampleRecord> raw_records,
                                            const ManifestOptions& options) {
  if (raw_records.empty()) throw PreconditionError("manifest has no records");

  std::vector<Diagnostic> rejected;
  std::vector<SampleRecord> accepted;
  accepted.reserve(raw_records.size());
  std::unordered_set<std::string> seen_ids;
  std::map<std::tuple<std::string, Modality, CohortLabel>, std::size_t> combination_counts;
  std::optional<std::size_t> dim = options.expected_dim;

  for (std::size_t i = 0; i < raw_records.size(); ++i) {
    auto& rec = raw_records[i];
    auto reject = [&](std::string reason) {
      rejected.push_back(Diagnostic{i, 0, rec.sample_id, std::move(reason)});
    };
    if (rec.sample_id.empty()) {
      reject("empty sample_id");
      continue;
    }
    if (rec.subject_id.empty()) {
      reject("empty subject_id");
      continue;
    }
    if (rec.modality.tag().empty() || rec.cohort.name().empty()) {
      reject("missing modality or cohort");
      continue;
    }
    if (rec.features.empty()) {
      reject("empty feature vector");
      continue;
    }
    auto bad = std::find_if(rec.features.begin(), rec.features.end(),
                            [](double v) { return !std::isfinite(v); });
    if (bad != rec.features.end()) {
      reject("non-finite feature at index " + std::to_string(bad - rec.features.begin()));
      continue;
    }
    if (dim && rec.features.size() != *dim) {
      reject("feature dimension " + std::to_string(rec.features.size()) + " does not match " +
             std::to_string(*dim));
      continue;
    }
    if (seen_ids.count(rec.sample_id) != 0) {
      reject("duplicate sample_id");
      continue;
    }
    auto& count = combination_counts[{rec.subject_id, rec.modality, rec.cohort}];
    if (options.max_per_combination != 0 && count >= options.max_per_combination) {
      reject("more than " + std::to_string(options.max_per_combination) +
             " samples for subject '" + rec.subject_id + "', modality " + rec.modality.tag() +
             ", cohort " + rec.cohort.name());
      continue;
    }
    ++count;
    if (!dim) dim = rec.features.size();
    seen_ids.insert(rec.sample_id);
    accepted.push_back(std::move(rec));
  }

  if (options.strict && !rejected.empty()) throw ValidationError(std::move(rejected));
  if (accepted.empty()) throw ValidationError(std::move(rejected));

  std::sort(accepted.begin(), accepted.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id < b.sample_id; });
  return ManifestValidation{DatasetManifest(std::move(accepted), *dim), std::move(rejected)};
}

/// Groups samples by cohort. Every sample lands in exactly one bucket;
/// buckets keep the manifest's sample_id order.
inline std::map<CohortLabel, std::vector<SampleRecord>> partition_by_cohort(
    const DatasetManifest& manifest) {
  std::map<CohortLabel, std::vector<SampleRecord>> buckets;
  for (const auto& s : manifest.samples()) buckets[s.cohort].push_back(s);
  return buckets;
}

struct SubjectFold {
  std::vector<std::string> subjects;  // sorted
  std::vector<SampleRecord> samples;  // sample_id order
};

/// Splits subjects into `k` disjoint folds whose sizes differ by at most one.
/// Subject ids are sorted, shuffled with a generator seeded by `seed`, then
/// dealt round-robin, so membership depends only on (subject ids, k, seed).
inline std::vector<SubjectFold> partition_by_subject_folds(const DatasetManifest& manifest,
                                                           std::size_t k, std::uint64_t seed) {
  if (k < 2) throw PreconditionError("fold count must be at least 2");
  std::vector<std::string> order = manifest.subjects();
  if (k > order.size())
    throw PreconditionError("fold count " + std::to_string(k) + " exceeds subject count " +
                            std::to_string(order.size()));

  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<SubjectFold> folds(k);
  std::unordered_map<std::string, std::size_t> fold_of;
  for (std::size_t i = 0; i < order.size(); ++i) {
    folds[i % k].subjects.push_back(order[i]);
    fold_of[order[i]] = i % k;
  }
  for (auto& f : folds) std::sort(f.subjects.begin(), f.subjects.end());
  for (const auto& s : manifest.samples()) folds[fold_of.at(s.subject_id)].samples.push_back(s);
  return folds;
}

}  // namespace rtb
