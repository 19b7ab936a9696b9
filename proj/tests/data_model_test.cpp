#include "rtb/data_model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "rtb/synthetic.hpp"
#include "test_util.hpp"

namespace rtb {
namespace {

using testing::record;

TEST(Modality, CanonicalUppercaseAndKnownOrder) {
  EXPECT_EQ(Modality("nir").tag(), "NIR");
  EXPECT_EQ(Modality(" Sketch ").tag(), "SKETCH");
  EXPECT_EQ(Modality("rgb"), Modality::rgb());
  EXPECT_LT(Modality::rgb(), Modality::nir());
  EXPECT_LT(Modality::nir(), Modality::ir());
  EXPECT_LT(Modality::ir(), Modality::sketch());
  EXPECT_LT(Modality::sketch(), Modality("depth"));
  EXPECT_FALSE(Modality("depth").is_known());
  EXPECT_THROW(Modality("  "), InvariantError);
}

TEST(CohortLabel, CanonicalLowercase) {
  EXPECT_EQ(CohortLabel("Sunglasses").name(), "sunglasses");
  EXPECT_EQ(CohortLabel("SMILE"), CohortLabel("smile"));
  EXPECT_THROW(CohortLabel(""), InvariantError);
}

TEST(ValidateManifest, CountsSubjects) {
  auto v = validate_manifest({record("a", "s1", "RGB", "neutral", {1, 2}), record("b", "s1", "RGB", "smile", {1, 3}),
                              record("c", "s2", "RGB", "neutral", {0, 2})});
  EXPECT_EQ(v.manifest.subject_count(), 2u);
  EXPECT_EQ(v.manifest.feature_dim(), 2u);
  EXPECT_TRUE(v.rejected.empty());
}

TEST(ValidateManifest, DimensionMismatchNamesSample) {
  std::vector<SampleRecord> recs = {record("r1", "s1", "RGB", "neutral", std::vector<double>(128, 0.5)),
                                    record("r2", "s2", "RGB", "neutral", std::vector<double>(128, 0.5)),
                                    record("odd-one", "s3", "RGB", "neutral", std::vector<double>(64, 0.5))};
  try {
    validate_manifest(recs);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.diagnostics().size(), 1u);
    EXPECT_EQ(e.diagnostics()[0].sample_id, "odd-one");
    EXPECT_NE(std::string(e.what()).find("odd-one"), std::string::npos);
  }
}

TEST(ValidateManifest, RejectsBadRecords) {
  EXPECT_THROW(validate_manifest({}), PreconditionError);
  EXPECT_THROW(validate_manifest({record("a", "s", "RGB", "x", {1}), record("a", "t", "RGB", "x", {2})}),
               ValidationError);
  EXPECT_THROW(validate_manifest({record("a", "s", "RGB", "x", {1, std::nan("")})}), ValidationError);
  EXPECT_THROW(validate_manifest({record("a", "s", "RGB", "x", {1, INFINITY})}), ValidationError);
  EXPECT_THROW(validate_manifest({record("a", "s", "RGB", "x", {})}), ValidationError);
}

TEST(ValidateManifest, LenientModeDropsAndReports) {
  ManifestOptions opts;
  opts.strict = false;
  opts.max_per_combination = 1;
  auto v = validate_manifest({record("a", "s", "RGB", "x", {1}), record("b", "s", "rgb", "X", {2}),
                              record("c", "s", "RGB", "y", {3})},
                             opts);
  EXPECT_EQ(v.manifest.size(), 2u);
  ASSERT_EQ(v.rejected.size(), 1u);
  EXPECT_EQ(v.rejected[0].sample_id, "b");
  EXPECT_EQ(v.rejected[0].index, 1u);
}

TEST(ValidateManifest, OrderIndependent) {
  std::vector<SampleRecord> recs = {record("b", "s2", "NIR", "smile", {1}), record("a", "s1", "RGB", "neutral", {2}),
                                    record("c", "s1", "RGB", "smile", {3})};
  auto first = validate_manifest(recs).manifest;
  std::reverse(recs.begin(), recs.end());
  EXPECT_EQ(first, validate_manifest(recs).manifest);
  EXPECT_EQ(first.samples().front().sample_id, "a");
}

TEST(ValidateManifest, TuftsShapedSyntheticSubjectCount) {
  SynthConfig c;
  c.subject_count = 113;
  c.modalities = {Modality::rgb(), Modality::nir()};
  c.feature_dim = 8;
  auto m = generate(c);
  ASSERT_EQ(m.size(), 1130u);
  std::set<std::string> ids;
  for (const auto& s : m.samples()) ids.insert(s.subject_id);
  EXPECT_EQ(ids.size(), 113u);
  EXPECT_EQ(m.subject_count(), ids.size());
}

TEST(PartitionByCohort, CoversEverySampleOnce) {
  SynthConfig c;
  c.subject_count = 7;
  c.modalities = {Modality::rgb(), Modality::ir()};
  c.feature_dim = 3;
  auto m = generate(c);
  auto buckets = partition_by_cohort(m);
  ASSERT_EQ(buckets.size(), 5u);
  std::size_t total = 0;
  std::multiset<std::string> seen;
  for (const auto& [label, samples] : buckets) {
    // generator bookkeeping: one sample per subject and modality per cohort
    EXPECT_EQ(samples.size(), c.subject_count * c.modalities.size()) << label.name();
    total += samples.size();
    for (const auto& s : samples) {
      EXPECT_EQ(s.cohort, label);
      seen.insert(s.sample_id);
    }
  }
  EXPECT_EQ(total, m.size());
  EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), m.size());
}

TEST(PartitionByCohort, SingleCohortIsIdentity) {
  auto m = validate_manifest({record("a", "s1", "RGB", "neutral", {1}), record("b", "s2", "RGB", "neutral", {2})})
               .manifest;
  auto buckets = partition_by_cohort(m);
  ASSERT_EQ(buckets.size(), 1u);
  EXPECT_EQ(buckets.begin()->second, m.samples());
}

DatasetManifest subjects_only(std::size_t n) {
  std::vector<SampleRecord> recs;
  for (std::size_t i = 0; i < n; ++i)
    for (const char* cohort : {"neutral", "smile"})
      recs.push_back(record("x" + std::to_string(i) + cohort, "subject" + std::to_string(i), "RGB", cohort,
                            {static_cast<double>(i)}));
  return validate_manifest(recs).manifest;
}

TEST(PartitionBySubjectFolds, TuftsFoldSizes) {
  auto folds = partition_by_subject_folds(subjects_only(113), 5, 42);
  std::vector<std::size_t> sizes;
  for (const auto& f : folds) sizes.push_back(f.subjects.size());
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{22, 22, 23, 23, 23}));
}

TEST(PartitionBySubjectFolds, SingletonFolds) {
  auto folds = partition_by_subject_folds(subjects_only(10), 10, 1);
  ASSERT_EQ(folds.size(), 10u);
  for (const auto& f : folds) {
    EXPECT_EQ(f.subjects.size(), 1u);
    EXPECT_EQ(f.samples.size(), 2u);
  }
}

TEST(PartitionBySubjectFolds, DeterministicUnderRecordShuffle) {
  auto m = subjects_only(31);
  auto recs = m.samples();
  std::mt19937_64 rng(5);
  std::shuffle(recs.begin(), recs.end(), rng);
  auto shuffled = validate_manifest(recs).manifest;
  auto a = partition_by_subject_folds(m, 4, 99);
  auto b = partition_by_subject_folds(shuffled, 4, 99);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].subjects, b[i].subjects);
    EXPECT_EQ(a[i].samples, b[i].samples);
  }
  auto c = partition_by_subject_folds(m, 4, 100);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_diff |= a[i].subjects != c[i].subjects;
  EXPECT_TRUE(any_diff);
}

TEST(PartitionBySubjectFolds, DisjointAndComplete) {
  auto m = subjects_only(23);
  auto folds = partition_by_subject_folds(m, 6, 3);
  std::set<std::string> subjects;
  std::size_t samples = 0;
  for (const auto& f : folds) {
    for (const auto& s : f.subjects) EXPECT_TRUE(subjects.insert(s).second) << s << " in two folds";
    for (const auto& s : f.samples)
      EXPECT_TRUE(std::binary_search(f.subjects.begin(), f.subjects.end(), s.subject_id));
    samples += f.samples.size();
  }
  EXPECT_EQ(subjects.size(), 23u);
  EXPECT_EQ(samples, m.size());
}

TEST(PartitionBySubjectFolds, Errors) {
  EXPECT_THROW(partition_by_subject_folds(subjects_only(4), 5, 0), PreconditionError);
  EXPECT_THROW(partition_by_subject_folds(subjects_only(4), 1, 0), PreconditionError);
}

}  // namespace
}  // namespace rtb
