#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rtb/data_model.hpp"
#include "rtb/metrics.hpp"

namespace rtb {

/// What a fitted model is keyed on: enrolled subjects (identification) or
/// cohorts (classification).
enum class FitKey { kSubject, kCohort };

/// A fitted, immutable model. Safe to share between threads.
class FittedModel {
 public:
  virtual ~FittedModel() = default;

  /// Gallery keys ranked by descending score, ties by key ascending.
  virtual std::vector<Candidate> rank(std::span<const double> probe) const = 0;

  /// Score per cohort label; only meaningful for models fitted on FitKey::kCohort.
  virtual std::map<CohortLabel, double> classify(std::span<const double> probe) const = 0;
};

/// Contract the evaluation protocols drive. A classifier may expose several
/// hyperparameter configurations; protocols with a validation partition pick
/// one by rank-1 TPIR on it, others use `default_config()`.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t config_count() const { return 1; }
  virtual std::size_t default_config() const { return 0; }
  virtual std::string config_name(std::size_t config) const = 0;

  virtual std::shared_ptr<const FittedModel> fit(std::span<const SampleRecord> samples, FitKey key,
                                                 std::size_t config) const = 0;
};

// ---------------------------------------------------------------------------
// Nearest-centroid baseline
// ---------------------------------------------------------------------------

enum class DistanceMetric { kCosine, kEuclidean };

inline std::string to_string(DistanceMetric m) {
  return m == DistanceMetric::kCosine ? "cosine" : "euclidean";
}

inline DistanceMetric parse_distance_metric(std::string_view name) {
  auto lower = detail::to_lower(std::string(name));
  if (lower == "cosine") return DistanceMetric::kCosine;
  if (lower == "euclidean") return DistanceMetric::kEuclidean;
  throw PreconditionError("unknown distance metric '" + std::string(name) + "'");
}

/// Cosine similarity, 0 when either vector has zero norm.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(ss);
}

/// One centroid per key (subject id or cohort name), the arithmetic mean of
/// that key's feature vectors.
class CentroidModel final : public FittedModel {
 public:
  static CentroidModel fit(std::span<const SampleRecord> samples, FitKey key, DistanceMetric metric) {
    if (samples.empty()) throw PreconditionError("cannot fit a centroid model on zero samples");
    const std::size_t dim = samples.front().features.size();
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
    for (const auto& s : samples) {
      if (s.features.size() != dim)
        throw InvariantError("sample '" + s.sample_id + "' has dimension " +
                             std::to_string(s.features.size()) + ", expected " + std::to_string(dim));
      const std::string& k = key == FitKey::kSubject ? s.subject_id : s.cohort.name();
      auto& [sum, count] = sums[k];
      if (sum.empty()) sum.assign(dim, 0.0);
      for (std::size_t i = 0; i < dim; ++i) sum[i] += s.features[i];
      ++count;
    }
    CentroidModel model;
    model.key_ = key;
    model.metric_ = metric;
    model.dim_ = dim;
    for (auto& [k, entry] : sums) {
      auto& [sum, count] = entry;
      for (auto& v : sum) v /= static_cast<double>(count);
      model.keys_.push_back(k);
      model.centroids_.push_back(std::move(sum));
    }
    return model;
  }

  std::vector<Candidate> rank(std::span<const double> probe) const override {
    check_probe(probe);
    std::vector<Candidate> out;
    out.reserve(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) out.push_back({keys_[i], similarity(probe, centroids_[i])});
    sort_candidates(out);
    return out;
  }

  std::map<CohortLabel, double> classify(std::span<const double> probe) const override {
    if (key_ != FitKey::kCohort) throw PreconditionError("classify needs a model fitted on cohorts");
    check_probe(probe);
    std::map<CohortLabel, double> out;
    for (std::size_t i = 0; i < keys_.size(); ++i)
      out.emplace(CohortLabel(keys_[i]), similarity(probe, centroids_[i]));
    return out;
  }

  double similarity(std::span<const double> probe, std::span<const double> centroid) const {
    return metric_ == DistanceMetric::kCosine ? cosine_similarity(probe, centroid)
                                              : -euclidean_distance(probe, centroid);
  }

  const std::vector<std::string>& keys() const noexcept { return keys_; }
  const std::vector<std::vector<double>>& centroids() const noexcept { return centroids_; }
  DistanceMetric metric() const noexcept { return metric_; }
  FitKey key() const noexcept { return key_; }
  std::size_t dim() const noexcept { return dim_; }

 private:
  CentroidModel() = default;

  void check_probe(std::span<const double> probe) const {
    if (probe.size() != dim_)
      throw PreconditionError("probe dimension " + std::to_string(probe.size()) +
                              " does not match model dimension " + std::to_string(dim_));
    for (double v : probe)
      if (!std::isfinite(v)) throw PreconditionError("probe has a non-finite feature");
  }

  FitKey key_ = FitKey::kSubject;
  DistanceMetric metric_ = DistanceMetric::kCosine;
  std::size_t dim_ = 0;
  std::vector<std::string> keys_;
  std::vector<std::vector<double>> centroids_;
};

/// Nearest-centroid classifier whose configurations are distance metrics.
/// The first metric in the grid is the default.
class NearestCentroidClassifier final : public Classifier {
 public:
  explicit NearestCentroidClassifier(
      std::vector<DistanceMetric> grid = {DistanceMetric::kCosine, DistanceMetric::kEuclidean})
      : grid_(std::move(grid)) {
    if (grid_.empty()) throw PreconditionError("classifier needs at least one distance metric");
  }

  std::size_t config_count() const override { return grid_.size(); }
  std::string config_name(std::size_t config) const override { return to_string(grid_.at(config)); }

  std::shared_ptr<const FittedModel> fit(std::span<const SampleRecord> samples, FitKey key,
                                         std::size_t config) const override {
    return std::make_shared<const CentroidModel>(CentroidModel::fit(samples, key, grid_.at(config)));
  }

 private:
  std::vector<DistanceMetric> grid_;
};

}  // namespace rtb
