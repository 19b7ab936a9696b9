#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "rtb/data_model.hpp"
#include "rtb/error.hpp"

namespace rtb {

// ---------------------------------------------------------------------------
// Identification
// ---------------------------------------------------------------------------

struct Candidate {
  std::string subject_id;
  double score = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Canonical candidate order: score descending, subject_id ascending on ties.
inline bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.subject_id < b.subject_id;
}

inline void sort_candidates(std::vector<Candidate>& candidates) {
  std::stable_sort(candidates.begin(), candidates.end(), candidate_before);
}

/// One 1:N search: the probe's true subject and the ranked gallery.
struct IdentificationTrial {
  std::string probe_sample;
  std::string true_subject;
  std::vector<Candidate> candidates;
};

inline void validate_trial(const IdentificationTrial& trial) {
  if (trial.candidates.empty())
    throw InvariantError("identification trial '" + trial.probe_sample + "' has no candidates");
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < trial.candidates.size(); ++i) {
    const auto& c = trial.candidates[i];
    if (!std::isfinite(c.score))
      throw InvariantError("identification trial '" + trial.probe_sample + "' has a non-finite score");
    if (i > 0 && c.score > trial.candidates[i - 1].score)
      throw InvariantError("identification trial '" + trial.probe_sample +
                           "' candidates are not sorted by descending score");
    if (!ids.insert(c.subject_id).second)
      throw InvariantError("identification trial '" + trial.probe_sample +
                           "' lists subject '" + c.subject_id + "' twice");
  }
}

/// Sorts the candidates into canonical order and validates the result.
inline IdentificationTrial make_identification_trial(std::string probe_sample,
                                                     std::string true_subject,
                                                     std::vector<Candidate> candidates) {
  sort_candidates(candidates);
  IdentificationTrial trial{std::move(probe_sample), std::move(true_subject), std::move(candidates)};
  validate_trial(trial);
  return trial;
}

/// 1-based position of the true subject, or nullopt when absent.
inline std::optional<std::size_t> true_rank(const IdentificationTrial& trial) {
  for (std::size_t i = 0; i < trial.candidates.size(); ++i)
    if (trial.candidates[i].subject_id == trial.true_subject) return i + 1;
  return std::nullopt;
}

/// True positive identification rate at `rank`: one minus the fraction of
/// searches whose true subject is outside the top `rank` candidates. A trial
/// with fewer than `rank` candidates is judged on its whole list.
inline double tpir(std::span<const IdentificationTrial> trials, std::size_t rank) {
  if (trials.empty()) throw PreconditionError("tpir: no identification trials");
  if (rank == 0) throw PreconditionError("tpir: rank must be at least 1");
  // 1 - outside/N, written as inside/N so the result is a single rounding
  std::size_t inside = 0;
  for (const auto& t : trials) {
    validate_trial(t);
    auto r = true_rank(t);
    if (r && *r <= rank) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(trials.size());
}

struct CmcPoint {
  std::size_t rank = 0;
  double tpir = 0.0;

  friend bool operator==(const CmcPoint&, const CmcPoint&) = default;
};

/// TPIR for every rank 1..max_rank. Each point is computed with the same
/// formula as `tpir`, from a single histogram of true-subject ranks.
inline std::vector<CmcPoint> cmc_curve(std::span<const IdentificationTrial> trials,
                                       std::size_t max_rank) {
  if (trials.empty()) throw PreconditionError("cmc_curve: no identification trials");
  if (max_rank == 0) throw PreconditionError("cmc_curve: max_rank must be at least 1");
  std::vector<std::size_t> hits_at(max_rank + 1, 0);
  for (const auto& t : trials) {
    validate_trial(t);
    if (auto r = true_rank(t); r && *r <= max_rank) ++hits_at[*r];
  }
  std::vector<CmcPoint> curve;
  curve.reserve(max_rank);
  const auto n = static_cast<double>(trials.size());
  std::size_t within = 0;
  for (std::size_t r = 1; r <= max_rank; ++r) {
    within += hits_at[r];
    curve.push_back({r, static_cast<double>(within) / n});
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

struct ClassificationTrial {
  std::string sample;
  CohortLabel true_label;
  std::map<CohortLabel, double> label_scores;
};

inline void validate_trial(const ClassificationTrial& trial) {
  if (trial.label_scores.size() < 2)
    throw InvariantError("classification trial '" + trial.sample + "' needs at least two labels");
  if (trial.label_scores.count(trial.true_label) == 0)
    throw InvariantError("classification trial '" + trial.sample + "': true label '" +
                         trial.true_label.name() + "' is not in the label universe");
  for (const auto& [label, score] : trial.label_scores)
    if (!std::isfinite(score))
      throw InvariantError("classification trial '" + trial.sample + "' has a non-finite score");
}

/// Label with the highest score; ties go to the label that comes first in
/// canonical order.
inline CohortLabel rank1_prediction(const ClassificationTrial& trial) {
  validate_trial(trial);
  auto best = trial.label_scores.begin();
  for (auto it = std::next(best); it != trial.label_scores.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

/// Square count grid, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<CohortLabel> labels)
      : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

  ConfusionMatrix(std::vector<CohortLabel> labels, std::vector<std::vector<std::uint64_t>> rows)
      : ConfusionMatrix(std::move(labels)) {
    if (rows.size() != size()) throw InvariantError("confusion matrix row count mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
      if (rows[i].size() != size()) throw InvariantError("confusion matrix is not square");
      for (std::size_t j = 0; j < size(); ++j) at(i, j) = rows[i][j];
    }
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<CohortLabel>& labels() const noexcept { return labels_; }

  std::uint64_t& at(std::size_t truth, std::size_t predicted) {
    return counts_.at(truth * size() + predicted);
  }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_.at(truth * size() + predicted);
  }

  std::size_t index_of(const CohortLabel& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end())
      throw PreconditionError("label '" + label.name() + "' is not in the confusion matrix");
    return static_cast<std::size_t>(it - labels_.begin());
  }

  void add(const CohortLabel& truth, const CohortLabel& predicted) {
    ++at(index_of(truth), index_of(predicted));
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < size(); ++i) t += at(i, i);
    return t;
  }
  std::uint64_t row_sum(std::size_t i) const {
    std::uint64_t t = 0;
    for (std::size_t j = 0; j < size(); ++j) t += at(i, j);
    return t;
  }
  std::uint64_t col_sum(std::size_t j) const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < size(); ++i) t += at(i, j);
    return t;
  }

  /// Rows scaled to sum to one; an empty row stays all-zero.
  std::vector<std::vector<double>> row_normalized() const {
    std::vector<std::vector<double>> out(size(), std::vector<double>(size(), 0.0));
    for (std::size_t i = 0; i < size(); ++i) {
      auto rs = row_sum(i);
      if (rs == 0) continue;
      for (std::size_t j = 0; j < size(); ++j)
        out[i][j] = static_cast<double>(at(i, j)) / static_cast<double>(rs);
    }
    return out;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.labels_ != labels_) throw PreconditionError("cannot add confusion matrices over different labels");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::vector<CohortLabel> labels_;
  std::vector<std::uint64_t> counts_;
};

/// Tallies rank-1 predictions. All trials must share one label universe,
/// which becomes the matrix labels in canonical order.
inline ConfusionMatrix confusion_matrix(std::span<const ClassificationTrial> trials) {
  if (trials.empty()) throw PreconditionError("confusion_matrix: no classification trials");
  std::vector<CohortLabel> labels;
  for (const auto& [label, score] : trials.front().label_scores) labels.push_back(label);
  ConfusionMatrix cm(labels);
  for (const auto& t : trials) {
    bool same = t.label_scores.size() == labels.size() &&
                std::equal(labels.begin(), labels.end(), t.label_scores.begin(),
                           [](const CohortLabel& l, const auto& kv) { return l == kv.first; });
    if (!same)
      throw InvariantError("classification trial '" + t.sample +
                           "' uses a different label universe than the first trial");
    cm.add(t.true_label, rank1_prediction(t));
  }
  return cm;
}

/// Micro accuracy: trace over total.
inline double accuracy(const ConfusionMatrix& cm) {
  auto total = cm.total();
  if (total == 0) throw PreconditionError("accuracy: confusion matrix is empty");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

/// One-vs-rest recall per label; nullopt for a label with no ground-truth trials.
inline std::vector<std::optional<double>> per_class_sensitivity(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.size());
  for (std::size_t i = 0; i < cm.size(); ++i) {
    auto support = cm.row_sum(i);
    if (support != 0) out[i] = static_cast<double>(cm.at(i, i)) / static_cast<double>(support);
  }
  return out;
}

/// One-vs-rest true-negative rate per label; nullopt when every trial belongs
/// to that label (no negatives).
inline std::vector<std::optional<double>> per_class_specificity(const ConfusionMatrix& cm) {
  if (cm.size() < 2) throw PreconditionError("specificity is undefined with fewer than two classes");
  std::vector<std::optional<double>> out(cm.size());
  const auto total = cm.total();
  for (std::size_t i = 0; i < cm.size(); ++i) {
    auto negatives = total - cm.row_sum(i);
    if (negatives == 0) continue;
    auto false_pos = cm.col_sum(i) - cm.at(i, i);
    out[i] = static_cast<double>(negatives - false_pos) / static_cast<double>(negatives);
  }
  return out;
}

/// Macro average with the labels left out because their rate is undefined.
struct MacroAverage {
  double value = 0.0;
  std::vector<CohortLabel> excluded;
};

inline MacroAverage macro_average(const ConfusionMatrix& cm,
                                  const std::vector<std::optional<double>>& per_class,
                                  const char* what) {
  MacroAverage out;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < per_class.size(); ++i) {
    if (per_class[i]) {
      sum += *per_class[i];
      ++n;
    } else {
      out.excluded.push_back(cm.labels()[i]);
    }
  }
  if (n == 0) throw PreconditionError(std::string(what) + " is undefined for every label");
  out.value = sum / static_cast<double>(n);
  return out;
}

inline MacroAverage sensitivity_macro_detail(const ConfusionMatrix& cm) {
  return macro_average(cm, per_class_sensitivity(cm), "sensitivity");
}

inline MacroAverage specificity_macro_detail(const ConfusionMatrix& cm) {
  return macro_average(cm, per_class_specificity(cm), "specificity");
}

inline double sensitivity_macro(const ConfusionMatrix& cm) {
  return sensitivity_macro_detail(cm).value;
}

inline double specificity_macro(const ConfusionMatrix& cm) {
  return specificity_macro_detail(cm).value;
}

// ---------------------------------------------------------------------------
// Risk, trust, aggregation
// ---------------------------------------------------------------------------

/// Costs of a false non-match (alpha) and a false match (beta).
struct RiskParams {
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0.0 || beta < 0.0)
      throw PreconditionError("risk costs must be finite and non-negative");
  }

  friend bool operator==(const RiskParams&, const RiskParams&) = default;
};

namespace detail {
inline void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw PreconditionError(std::string(name) + " must lie in [0, 1], got " + std::to_string(p));
}
}  // namespace detail

/// alpha * FNMR + beta * FMR.
inline double risk_error(double error_fnmr, double error_fmr, const RiskParams& params) {
  params.validate();
  detail::require_probability(error_fnmr, "FNMR");
  detail::require_probability(error_fmr, "FMR");
  return params.alpha * error_fnmr + params.beta * error_fmr;
}

/// Risk from classifier rates, with FNMR = 1 - sensitivity and
/// FMR = 1 - specificity.
inline double risk_from_rates(double sensitivity, double specificity, const RiskParams& params) {
  detail::require_probability(sensitivity, "sensitivity");
  detail::require_probability(specificity, "specificity");
  return risk_error(1.0 - sensitivity, 1.0 - specificity, params);
}

/// Change in trust when moving from condition i to condition j: R_j - R_i.
/// Positive is a gain of trust.
inline double bias_trust(double reliability_i, double reliability_j) {
  detail::require_probability(reliability_i, "reliability");
  detail::require_probability(reliability_j, "reliability");
  return reliability_j - reliability_i;
}

/// Mean and population standard deviation over folds.
struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> fold_values;

  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

inline MetricSummary aggregate_mean_std(std::vector<double> fold_values) {
  if (fold_values.empty()) throw PreconditionError("aggregate_mean_std: no fold values");
  const auto n = static_cast<double>(fold_values.size());
  double sum = 0.0;
  for (double v : fold_values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : fold_values) ss += (v - mean) * (v - mean);
  return MetricSummary{mean, std::sqrt(ss / n), std::move(fold_values)};
}

/// Overall performance split by cohort, with the cohorts the system is
/// biased for (highest value) and against (lowest value).
struct CohortDecomposition {
  double overall = 0.0;
  CohortLabel bias_against;
  double against_value = 0.0;
  CohortLabel bias_for;
  double for_value = 0.0;

  friend bool operator==(const CohortDecomposition&, const CohortDecomposition&) = default;
};

/// Overall is the unweighted mean of cohort values. Ties for either extreme
/// resolve to the cohort that comes first in canonical order.
inline CohortDecomposition cohort_decomposition(const std::map<CohortLabel, double>& per_cohort) {
  if (per_cohort.empty()) throw PreconditionError("cohort_decomposition: no cohorts");
  CohortDecomposition out;
  double sum = 0.0;
  auto lo = per_cohort.begin();
  auto hi = per_cohort.begin();
  for (auto it = per_cohort.begin(); it != per_cohort.end(); ++it) {
    sum += it->second;
    if (it->second < lo->second) lo = it;
    if (it->second > hi->second) hi = it;
  }
  out.overall = sum / static_cast<double>(per_cohort.size());
  out.bias_against = lo->first;
  out.against_value = lo->second;
  out.bias_for = hi->first;
  out.for_value = hi->second;
  return out;
}

}  // namespace rtb
