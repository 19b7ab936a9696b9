#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rtb/data_model.hpp"
#include "rtb/error.hpp"

namespace rtb {

/// Parameters of a Tufts-shaped synthetic embedding set: one sample per
/// (subject, modality, cohort), drawn from isotropic Gaussian clusters.
///
/// Distances are in units of the reference within-cluster sigma (1.0).
/// A sample is
///
///     center[subject][modality] + shift[cohort] + noise
///
/// where noise ~ N(0, (noise_sigma * (1 + cohort_noise[cohort]))^2 I).
/// Subject centers are drawn so the expected distance between two centers of
/// one modality is `subject_separation`, and centers of different modalities
/// correlate as given by `modality_correlation` (1 = identical centers,
/// 0 = independent).
struct SynthConfig {
  std::size_t subject_count = 113;
  std::vector<CohortLabel> cohorts{CohortLabel("neutral"), CohortLabel("smile"), CohortLabel("sleepy"),
                                   CohortLabel("shock"), CohortLabel("sunglasses")};
  std::vector<Modality> modalities{Modality::rgb()};
  std::size_t feature_dim = 64;
  double subject_separation = 8.0;
  /// Row/column order follows `modalities`. Empty means identity.
  std::vector<std::vector<double>> modality_correlation;
  /// Extra noise per cohort; 2.0 triples that cohort's within-cluster sigma.
  std::map<CohortLabel, double> cohort_noise;
  /// Length of each cohort's offset vector. Offset directions are random.
  std::map<CohortLabel, double> cohort_shift;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
};

namespace detail {

/// Lower-triangular L with L L^T = a, for symmetric positive semidefinite a.
/// Zero pivots are allowed so that perfectly correlated modalities work.
inline std::vector<std::vector<double>> psd_cholesky(const std::vector<std::vector<double>>& a) {
  constexpr double kTol = 1e-9;
  const std::size_t n = a.size();
  std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
    if (d < -kTol) throw InvariantError("modality correlation matrix is not positive semidefinite");
    const bool zero_pivot = d <= kTol;
    l[j][j] = zero_pivot ? 0.0 : std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (zero_pivot) {
        if (std::abs(s) > kTol) throw InvariantError("modality correlation matrix is not positive semidefinite");
        l[i][j] = 0.0;
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  }
  return l;
}

inline std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag, std::uint32_t a = 0,
                              std::uint32_t b = 0, std::uint32_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag, a, b, c};
  return std::mt19937_64(seq);
}

inline std::string zero_pad(std::size_t value, std::size_t width) {
  auto s = std::to_string(value);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

}  // namespace detail

inline void validate(const SynthConfig& c) {
  if (c.subject_count < 1) throw InvariantError("synthetic config: subject_count must be at least 1");
  if (c.cohorts.empty()) throw InvariantError("synthetic config: at least one cohort is required");
  if (c.modalities.empty()) throw InvariantError("synthetic config: at least one modality is required");
  if (c.feature_dim < 1) throw InvariantError("synthetic config: feature_dim must be at least 1");
  if (std::set<CohortLabel>(c.cohorts.begin(), c.cohorts.end()).size() != c.cohorts.size())
    throw InvariantError("synthetic config: duplicate cohort");
  if (std::set<Modality>(c.modalities.begin(), c.modalities.end()).size() != c.modalities.size())
    throw InvariantError("synthetic config: duplicate modality");
  auto non_negative = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!non_negative(c.subject_separation) || !non_negative(c.noise_sigma))
    throw InvariantError("synthetic config: separation and noise_sigma must be finite and >= 0");
  for (const auto* table : {&c.cohort_noise, &c.cohort_shift})
    for (const auto& [label, v] : *table) {
      if (std::find(c.cohorts.begin(), c.cohorts.end(), label) == c.cohorts.end())
        throw InvariantError("synthetic config: unknown cohort '" + label.name() + "'");
      if (!non_negative(v)) throw InvariantError("synthetic config: cohort values must be finite and >= 0");
    }

  const auto& r = c.modality_correlation;
  if (r.empty()) return;
  const std::size_t m = c.modalities.size();
  if (r.size() != m) throw InvariantError("modality correlation matrix must be " + std::to_string(m) + "x" + std::to_string(m));
  for (std::size_t i = 0; i < m; ++i) {
    if (r[i].size() != m) throw InvariantError("modality correlation matrix must be square");
    if (r[i][i] != 1.0) throw InvariantError("modality correlation matrix needs a unit diagonal");
    for (std::size_t j = 0; j < m; ++j) {
      if (!(r[i][j] >= 0.0 && r[i][j] <= 1.0))
        throw InvariantError("modality correlation entries must lie in [0, 1]");
      if (std::abs(r[i][j] - r[j][i]) > 1e-12) throw InvariantError("modality correlation matrix must be symmetric");
    }
  }
  detail::psd_cholesky(r);
}

/// Draws the dataset. Every random quantity comes from a stream keyed by
/// (seed, what, indices), so the result does not depend on generation order.
inline DatasetManifest generate(const SynthConfig& config) {
  validate(config);
  const std::size_t m = config.modalities.size();
  const std::size_t d = config.feature_dim;

  std::vector<std::vector<double>> corr = config.modality_correlation;
  if (corr.empty()) {
    corr.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) corr[i][i] = 1.0;
  }
  const auto mix = detail::psd_cholesky(corr);

  enum : std::uint32_t { kSubjectStream = 1, kCohortStream = 2, kNoiseStream = 3 };

  std::vector<std::vector<double>> offsets;
  for (std::size_t c = 0; c < config.cohorts.size(); ++c) {
    std::vector<double> dir(d, 0.0);
    auto it = config.cohort_shift.find(config.cohorts[c]);
    const double length = it == config.cohort_shift.end() ? 0.0 : it->second;
    if (length > 0.0) {
      auto rng = detail::stream(config.seed, kCohortStream, static_cast<std::uint32_t>(c));
      std::normal_distribution<double> unit;
      double norm = 0.0;
      while (norm == 0.0) {
        norm = 0.0;
        for (auto& v : dir) {
          v = unit(rng);
          norm += v * v;
        }
      }
      norm = std::sqrt(norm);
      for (auto& v : dir) v *= length / norm;
    }
    offsets.push_back(std::move(dir));
  }

  const double center_scale = config.subject_separation / std::sqrt(2.0 * static_cast<double>(d));
  const std::size_t width = std::max<std::size_t>(3, std::to_string(config.subject_count).size());

  std::vector<SampleRecord> records;
  records.reserve(config.subject_count * m * config.cohorts.size());
  for (std::size_t s = 0; s < config.subject_count; ++s) {
    auto rng = detail::stream(config.seed, kSubjectStream, static_cast<std::uint32_t>(s));
    std::normal_distribution<double> center_dist(0.0, 1.0);
    std::vector<std::vector<double>> latent(m, std::vector<double>(d));
    for (auto& z : latent)
      for (auto& v : z) v = center_scale * center_dist(rng);

    const std::string subject = "subj" + detail::zero_pad(s + 1, width);
    for (std::size_t mi = 0; mi < m; ++mi) {
      std::vector<double> center(d, 0.0);
      for (std::size_t k = 0; k <= mi; ++k)
        if (mix[mi][k] != 0.0)
          for (std::size_t i = 0; i < d; ++i) center[i] += mix[mi][k] * latent[k][i];

      for (std::size_t c = 0; c < config.cohorts.size(); ++c) {
        const auto& cohort = config.cohorts[c];
        auto extra = config.cohort_noise.find(cohort);
        const double sigma = config.noise_sigma * (1.0 + (extra == config.cohort_noise.end() ? 0.0 : extra->second));
        std::vector<double> features(d);
        for (std::size_t i = 0; i < d; ++i) features[i] = center[i] + offsets[c][i];
        if (sigma > 0.0) {
          auto noise_rng = detail::stream(config.seed, kNoiseStream, static_cast<std::uint32_t>(s),
                                          static_cast<std::uint32_t>(mi), static_cast<std::uint32_t>(c));
          std::normal_distribution<double> noise(0.0, sigma);
          for (auto& v : features) v += noise(noise_rng);
        }
        const auto& mod = config.modalities[mi];
        records.push_back(SampleRecord{subject + "_" + mod.tag() + "_" + cohort.name(), subject, mod,
                                       cohort, std::move(features)});
      }
    }
  }
  return validate_manifest(std::move(records)).manifest;
}

}  // namespace rtb
