#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rtb/classifier.hpp"
#include "rtb/data_model.hpp"
#include "rtb/metrics.hpp"
#include "rtb/parallel.hpp"

namespace rtb {

/// Condition-by-condition grid of TPIR values. A cell is absent on the
/// excluded diagonal; each column average is the mean of its present cells.
struct ReliabilityMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<std::optional<double>>> cells;
  std::vector<std::optional<double>> averages;

  static ReliabilityMatrix from_cells(std::vector<std::string> rows, std::vector<std::string> cols,
                                      std::vector<std::vector<std::optional<double>>> cells) {
    if (cells.size() != rows.size()) throw InvariantError("reliability matrix row count mismatch");
    for (const auto& r : cells)
      if (r.size() != cols.size()) throw InvariantError("reliability matrix column count mismatch");
    ReliabilityMatrix m{std::move(rows), std::move(cols), std::move(cells), {}};
    m.averages = m.column_means();
    return m;
  }

  std::vector<std::optional<double>> column_means() const {
    std::vector<std::optional<double>> out(col_labels.size());
    for (std::size_t j = 0; j < col_labels.size(); ++j) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& row : cells)
        if (row[j]) {
          sum += *row[j];
          ++n;
        }
      if (n != 0) out[j] = sum / static_cast<double>(n);
    }
    return out;
  }

  std::optional<double> row_mean(std::size_t i) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells.at(i))
      if (c) {
        sum += *c;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }

  /// Per-column averages keyed by column label, ready for cohort_decomposition.
  std::map<CohortLabel, double> averages_by_label() const {
    std::map<CohortLabel, double> out;
    for (std::size_t j = 0; j < col_labels.size(); ++j)
      if (averages[j]) out[CohortLabel(col_labels[j])] = *averages[j];
    return out;
  }

  friend bool operator==(const ReliabilityMatrix&, const ReliabilityMatrix&) = default;
};

/// TPIR per (train modality, test modality) at several ranks.
struct RankedReliabilityCube {
  std::vector<std::size_t> ranks;
  std::vector<std::string> modalities;               // rows = train, columns = test
  std::vector<std::vector<std::vector<double>>> values;  // [rank index][train][test]

  std::size_t modality_index(const std::string& name) const {
    auto canon = Modality(name).tag();
    for (std::size_t i = 0; i < modalities.size(); ++i)
      if (modalities[i] == canon) return i;
    throw PreconditionError("modality '" + name + "' is not in the reliability cube");
  }

  std::size_t rank_index(std::size_t rank) const {
    for (std::size_t i = 0; i < ranks.size(); ++i)
      if (ranks[i] == rank) return i;
    throw PreconditionError("rank " + std::to_string(rank) + " is not in the reliability cube");
  }

  double at(const std::string& train, const std::string& test, std::size_t rank) const {
    return values.at(rank_index(rank)).at(modality_index(train)).at(modality_index(test));
  }

  ReliabilityMatrix panel(std::size_t rank_idx) const {
    std::vector<std::vector<std::optional<double>>> cells;
    for (const auto& row : values.at(rank_idx)) cells.emplace_back(row.begin(), row.end());
    return ReliabilityMatrix::from_cells(modalities, modalities, std::move(cells));
  }

  friend bool operator==(const RankedReliabilityCube&, const RankedReliabilityCube&) = default;
};

/// CMC points for one (row condition, column condition) evaluation.
struct CmcSeries {
  std::string row;
  std::string col;
  std::vector<CmcPoint> points;

  friend bool operator==(const CmcSeries&, const CmcSeries&) = default;
};

struct ProtocolOptions {
  std::size_t workers = 1;
  /// Force one classifier configuration instead of selecting on the
  /// validation partition (emotion-fold) or using the classifier default.
  std::optional<std::size_t> config;
  /// Highest rank recorded in CMC series.
  std::size_t cmc_max_rank = 10;
};

/// Ranks every probe against the model's gallery.
inline std::vector<IdentificationTrial> identify_all(const FittedModel& model,
                                                     std::span<const SampleRecord> probes) {
  std::vector<IdentificationTrial> trials;
  trials.reserve(probes.size());
  for (const auto& p : probes)
    trials.push_back(make_identification_trial(p.sample_id, p.subject_id, model.rank(p.features)));
  return trials;
}

namespace detail {

inline void require_gallery_covers(std::span<const SampleRecord> gallery,
                                   std::span<const SampleRecord> probes, const std::string& context) {
  std::set<std::string> enrolled;
  for (const auto& s : gallery) enrolled.insert(s.subject_id);
  for (const auto& p : probes)
    if (enrolled.count(p.subject_id) == 0)
      throw PreconditionError(context + ": subject '" + p.subject_id +
                              "' has no training samples (gallery gap)");
}

inline std::size_t checked_config(const Classifier& c, std::size_t config) {
  if (config >= c.config_count())
    throw PreconditionError("classifier configuration " + std::to_string(config) + " does not exist");
  return config;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Emotion-fold identification
// ---------------------------------------------------------------------------

struct EmotionFoldResult {
  ReliabilityMatrix matrix;  // rows = test cohort, columns = validation cohort
  /// Classifier configuration chosen for each present cell (empty on the diagonal).
  std::vector<std::vector<std::string>> selected_config;
  std::vector<CmcSeries> cmc;  // one per present cell, row-major
};

/// For every ordered pair (test cohort t, validation cohort v), t != v: fit
/// subject centroids on the remaining cohorts, choose the classifier
/// configuration with the best rank-1 TPIR on v, then record rank-1 TPIR on
/// t's probes in cell (t, v).
inline EmotionFoldResult emotion_fold_identification(const DatasetManifest& manifest,
                                                     const Classifier& classifier,
                                                     const ProtocolOptions& options = {}) {
  const auto cohorts = manifest.cohorts();
  const std::size_t n = cohorts.size();
  if (n < 3)
    throw PreconditionError("emotion-fold identification needs at least 3 cohorts, found " +
                            std::to_string(n));
  if (options.config) detail::checked_config(classifier, *options.config);

  auto buckets = partition_by_cohort(manifest);

  struct Cell {
    std::optional<double> value;
    std::string config;
    std::vector<CmcPoint> cmc;
  };
  std::vector<Cell> slots(n * n);

  parallel_for(n * n, options.workers, [&](std::size_t idx) {
    const std::size_t t = idx / n, v = idx % n;
    if (t == v) return;
    std::vector<SampleRecord> training;
    for (std::size_t c = 0; c < n; ++c)
      if (c != t && c != v)
        training.insert(training.end(), buckets.at(cohorts[c]).begin(), buckets.at(cohorts[c]).end());
    const auto& test_probes = buckets.at(cohorts[t]);
    const auto& val_probes = buckets.at(cohorts[v]);
    const std::string ctx = "test cohort " + cohorts[t].name() + ", validation cohort " + cohorts[v].name();
    detail::require_gallery_covers(training, test_probes, ctx);
    detail::require_gallery_covers(training, val_probes, ctx);

    std::size_t chosen = options.config.value_or(classifier.default_config());
    std::shared_ptr<const FittedModel> model;
    if (!options.config && classifier.config_count() > 1) {
      double best = -1.0;
      for (std::size_t c = 0; c < classifier.config_count(); ++c) {
        auto candidate = classifier.fit(training, FitKey::kSubject, c);
        double score = tpir(identify_all(*candidate, val_probes), 1);
        if (score > best) {
          best = score;
          chosen = c;
          model = std::move(candidate);
        }
      }
    } else {
      model = classifier.fit(training, FitKey::kSubject, chosen);
    }

    auto trials = identify_all(*model, test_probes);
    auto& cell = slots[idx];
    cell.value = tpir(trials, 1);
    cell.config = classifier.config_name(chosen);
    cell.cmc = cmc_curve(trials, options.cmc_max_rank);
  });

  EmotionFoldResult result;
  std::vector<std::string> names;
  for (const auto& c : cohorts) names.push_back(c.name());
  std::vector<std::vector<std::optional<double>>> cells(n, std::vector<std::optional<double>>(n));
  result.selected_config.assign(n, std::vector<std::string>(n));
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t v = 0; v < n; ++v) {
      auto& cell = slots[t * n + v];
      cells[t][v] = cell.value;
      result.selected_config[t][v] = cell.config;
      if (t != v) result.cmc.push_back({names[t], names[v], std::move(cell.cmc)});
    }
  result.matrix = ReliabilityMatrix::from_cells(names, names, std::move(cells));
  return result;
}

// ---------------------------------------------------------------------------
// Cross-modality identification
// ---------------------------------------------------------------------------

struct CrossModalityResult {
  RankedReliabilityCube cube;
  std::vector<CmcSeries> cmc;  // one per (train, test), row-major
};

/// Fits subject centroids on each train modality and identifies every probe
/// of each test modality against them, recording TPIR at each rank.
inline CrossModalityResult cross_modality_identification(const DatasetManifest& manifest,
                                                         const Classifier& classifier,
                                                         std::vector<std::size_t> ranks,
                                                         const ProtocolOptions& options = {}) {
  if (ranks.empty()) throw PreconditionError("cross-modality identification needs at least one rank");
  for (auto r : ranks)
    if (r == 0) throw PreconditionError("ranks must be at least 1");
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());

  const auto modalities = manifest.modalities();
  const std::size_t m = modalities.size();
  if (m < 2)
    throw PreconditionError("cross-modality identification needs at least 2 modalities, found " +
                            std::to_string(m));
  const std::size_t config = detail::checked_config(classifier, options.config.value_or(classifier.default_config()));

  std::vector<std::vector<SampleRecord>> by_modality(m);
  for (const auto& s : manifest.samples())
    for (std::size_t i = 0; i < m; ++i)
      if (s.modality == modalities[i]) by_modality[i].push_back(s);
  for (std::size_t i = 0; i < m; ++i) {
    std::set<std::string> present;
    for (const auto& s : by_modality[i]) present.insert(s.subject_id);
    if (present.size() != manifest.subject_count()) {
      for (const auto& subj : manifest.subjects())
        if (present.count(subj) == 0)
          throw PreconditionError("subject '" + subj + "' has no " + modalities[i].tag() +
                                  " samples; cross-modality identification needs every subject in every modality");
    }
  }

  const std::size_t cmc_rank = std::max(options.cmc_max_rank, ranks.back());
  std::vector<std::vector<CmcPoint>> curves(m * m);

  parallel_for(m * m, options.workers, [&](std::size_t idx) {
    const std::size_t train = idx / m, test = idx % m;
    auto model = classifier.fit(by_modality[train], FitKey::kSubject, config);
    curves[idx] = cmc_curve(identify_all(*model, by_modality[test]), cmc_rank);
  });

  CrossModalityResult result;
  result.cube.ranks = ranks;
  for (const auto& mod : modalities) result.cube.modalities.push_back(mod.tag());
  result.cube.values.assign(ranks.size(), std::vector<std::vector<double>>(m, std::vector<double>(m)));
  for (std::size_t idx = 0; idx < m * m; ++idx) {
    const std::size_t train = idx / m, test = idx % m;
    for (std::size_t r = 0; r < ranks.size(); ++r)
      result.cube.values[r][train][test] = curves[idx][ranks[r] - 1].tpir;
    result.cmc.push_back({modalities[train].tag(), modalities[test].tag(), std::move(curves[idx])});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Subject-fold classification
// ---------------------------------------------------------------------------

struct ClassificationOutcome {
  std::vector<CohortLabel> labels;
  MetricSummary accuracy;
  MetricSummary sensitivity;
  MetricSummary specificity;
  ConfusionMatrix pooled;
  std::vector<ConfusionMatrix> per_fold;
  std::vector<std::vector<std::string>> fold_subjects;
  std::vector<std::string> diagnostics;
};

/// k-fold cross-validation with subject-disjoint folds: each fold's subjects
/// are classified by cohort centroids fitted on the other folds, restricted
/// to `label_set`.
inline ClassificationOutcome subject_fold_classification(const DatasetManifest& manifest,
                                                         const Classifier& classifier, std::size_t k,
                                                         std::uint64_t seed,
                                                         std::vector<CohortLabel> label_set,
                                                         const ProtocolOptions& options = {}) {
  std::sort(label_set.begin(), label_set.end());
  label_set.erase(std::unique(label_set.begin(), label_set.end()), label_set.end());
  if (label_set.size() < 2) throw PreconditionError("classification needs at least two labels");
  for (const auto& l : label_set)
    if (!std::binary_search(manifest.cohorts().begin(), manifest.cohorts().end(), l))
      throw PreconditionError("label '" + l.name() + "' does not occur in the manifest");
  const std::size_t config = detail::checked_config(classifier, options.config.value_or(classifier.default_config()));

  const std::set<CohortLabel> wanted(label_set.begin(), label_set.end());
  auto restricted = manifest.filter([&](const SampleRecord& s) { return wanted.count(s.cohort) != 0; });
  auto folds = partition_by_subject_folds(restricted, k, seed);

  std::vector<ConfusionMatrix> per_fold(k);
  parallel_for(k, options.workers, [&](std::size_t f) {
    std::vector<SampleRecord> training;
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) training.insert(training.end(), folds[g].samples.begin(), folds[g].samples.end());
    std::set<CohortLabel> trained;
    for (const auto& s : training) trained.insert(s.cohort);
    if (trained != wanted)
      throw PreconditionError("fold " + std::to_string(f + 1) +
                              ": training folds do not cover every label in the label set");
    auto model = classifier.fit(training, FitKey::kCohort, config);
    std::vector<ClassificationTrial> trials;
    trials.reserve(folds[f].samples.size());
    for (const auto& s : folds[f].samples)
      trials.push_back({s.sample_id, s.cohort, model->classify(s.features)});
    per_fold[f] = confusion_matrix(trials);
  });

  ClassificationOutcome out;
  out.labels = label_set;
  out.pooled = ConfusionMatrix(label_set);
  std::vector<double> acc, sens, spec;
  for (std::size_t f = 0; f < k; ++f) {
    const auto& cm = per_fold[f];
    out.pooled += cm;
    acc.push_back(accuracy(cm));
    auto se = sensitivity_macro_detail(cm);
    auto sp = specificity_macro_detail(cm);
    for (const auto& l : se.excluded)
      out.diagnostics.push_back("fold " + std::to_string(f + 1) + ": no '" + l.name() +
                                "' samples, recall excluded from the macro average");
    for (const auto& l : sp.excluded)
      out.diagnostics.push_back("fold " + std::to_string(f + 1) + ": only '" + l.name() +
                                "' samples, specificity excluded from the macro average");
    sens.push_back(se.value);
    spec.push_back(sp.value);
    out.fold_subjects.push_back(folds[f].subjects);
  }
  out.per_fold = std::move(per_fold);
  out.accuracy = aggregate_mean_std(std::move(acc));
  out.sensitivity = aggregate_mean_std(std::move(sens));
  out.specificity = aggregate_mean_std(std::move(spec));
  return out;
}

// ---------------------------------------------------------------------------
// Trust deltas
// ---------------------------------------------------------------------------

/// A cell of a reliability cube.
struct Condition {
  std::string train;
  std::string test;
  std::size_t rank = 1;

  friend bool operator==(const Condition&, const Condition&) = default;
};

/// Change in trust moving from `base` to `target`.
inline double trust_delta_report(const RankedReliabilityCube& cube, const Condition& base,
                                 const Condition& target) {
  return bias_trust(cube.at(base.train, base.test, base.rank),
                    cube.at(target.train, target.test, target.rank));
}

}  // namespace rtb
