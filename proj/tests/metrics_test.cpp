#include "rtb/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

namespace rtb {
namespace {

/// Trial over subjects s0..s{n-1} (scores n..1) whose true subject sits at
/// 1-based `position`, or is absent when position == 0.
IdentificationTrial trial_with_rank(std::size_t position, std::size_t n = 4, const std::string& probe = "p") {
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < n; ++i) cands.push_back({"s" + std::to_string(i), static_cast<double>(n - i)});
  std::string truth = position == 0 ? "absent" : "s" + std::to_string(position - 1);
  return make_identification_trial(probe, truth, cands);
}

std::vector<IdentificationTrial> trials_with_ranks(const std::vector<std::size_t>& ranks, std::size_t n = 4) {
  std::vector<IdentificationTrial> out;
  for (std::size_t i = 0; i < ranks.size(); ++i) out.push_back(trial_with_rank(ranks[i], n, "p" + std::to_string(i)));
  return out;
}

TEST(Tpir, RankCountExample) {
  auto trials = trials_with_ranks({1, 1, 2, 3});
  const double expected = oracle::tpir(trials, 1);
  EXPECT_DOUBLE_EQ(expected, 0.5);
  EXPECT_DOUBLE_EQ(tpir(trials, 1), expected);
}

TEST(Tpir, EverythingInsideTopR) {
  auto trials = trials_with_ranks({4, 2, 1, 3});
  EXPECT_DOUBLE_EQ(tpir(trials, 4), 1.0);
  EXPECT_DOUBLE_EQ(tpir(trials, 50), 1.0);
}

TEST(Tpir, NothingFound) {
  auto trials = trials_with_ranks({0, 0, 0});
  for (std::size_t r : {1u, 2u, 4u, 100u}) EXPECT_DOUBLE_EQ(tpir(trials, r), 0.0);
}

TEST(Tpir, ShortListJudgedOnWholeList) {
  std::vector<IdentificationTrial> trials = {trial_with_rank(2, 2, "a"), trial_with_rank(1, 5, "b")};
  EXPECT_DOUBLE_EQ(tpir(trials, 10), 1.0);
  EXPECT_DOUBLE_EQ(tpir(trials, 1), 0.5);
}

TEST(Tpir, Errors) {
  std::vector<IdentificationTrial> none;
  EXPECT_THROW(tpir(none, 1), PreconditionError);
  EXPECT_THROW(tpir(trials_with_ranks({1}), 0), PreconditionError);

  IdentificationTrial unsorted{"p", "a", {{"a", 0.1}, {"b", 0.9}}};
  EXPECT_THROW(validate_trial(unsorted), InvariantError);
  IdentificationTrial dup{"p", "a", {{"a", 0.9}, {"a", 0.1}}};
  EXPECT_THROW(validate_trial(dup), InvariantError);
  IdentificationTrial nan_score{"p", "a", {{"a", std::nan("")}}};
  EXPECT_THROW(validate_trial(nan_score), InvariantError);
  IdentificationTrial empty{"p", "a", {}};
  EXPECT_THROW(validate_trial(empty), InvariantError);
}

TEST(Tpir, TieRuleOrdersBySubjectId) {
  auto t = make_identification_trial("p", "b", {{"c", 0.5}, {"b", 0.5}, {"a", 0.5}, {"z", 0.7}});
  ASSERT_EQ(t.candidates.size(), 4u);
  EXPECT_EQ(t.candidates[0].subject_id, "z");
  EXPECT_EQ(t.candidates[1].subject_id, "a");
  EXPECT_EQ(t.candidates[2].subject_id, "b");
  EXPECT_EQ(true_rank(t), 3u);
}

TEST(CmcCurve, RankCountExample) {
  auto trials = trials_with_ranks({1, 1, 2, 3});
  auto curve = cmc_curve(trials, 3);
  std::vector<CmcPoint> expected;
  for (std::size_t r = 1; r <= 3; ++r) expected.push_back({r, oracle::tpir(trials, r)});
  EXPECT_EQ(curve, expected);
  EXPECT_EQ(curve, (std::vector<CmcPoint>{{1, 0.5}, {2, 0.75}, {3, 1.0}}));
}

TEST(CmcCurve, AllRankOneIsFlat) {
  for (const auto& p : cmc_curve(trials_with_ranks({1, 1, 1}), 6)) EXPECT_DOUBLE_EQ(p.tpir, 1.0);
}

TEST(CmcCurve, SingleTrialStep) {
  auto curve = cmc_curve(trials_with_ranks({5}, 12), 10);
  ASSERT_EQ(curve.size(), 10u);
  for (const auto& p : curve) EXPECT_DOUBLE_EQ(p.tpir, p.rank < 5 ? 0.0 : 1.0) << "rank " << p.rank;
}

ClassificationTrial ctrial(const std::string& truth, std::map<std::string, double> scores) {
  ClassificationTrial t{"x", CohortLabel(truth), {}};
  for (const auto& [k, v] : scores) t.label_scores[CohortLabel(k)] = v;
  return t;
}

TEST(Rank1Prediction, ArgmaxAndTies) {
  EXPECT_EQ(rank1_prediction(ctrial("smile", {{"smile", 0.9}, {"neutral", 0.1}})), CohortLabel("smile"));
  EXPECT_EQ(rank1_prediction(ctrial("b", {{"a", 0.5}, {"b", 0.5}})), CohortLabel("a"));
  EXPECT_EQ(rank1_prediction(ctrial("shock", {{"smile", 0.2},
                                              {"neutral", 0.2},
                                              {"shock", 0.2},
                                              {"sleepy", 0.2},
                                              {"sunglasses", 0.2}})),
            CohortLabel("neutral"));
}

TEST(Rank1Prediction, InvalidTrials) {
  EXPECT_THROW(rank1_prediction(ctrial("a", {{"a", 1.0}})), InvariantError);
  EXPECT_THROW(rank1_prediction(ctrial("c", {{"a", 1.0}, {"b", 0.0}})), InvariantError);
  EXPECT_THROW(rank1_prediction(ctrial("a", {{"a", NAN}, {"b", 0.0}})), InvariantError);
}

TEST(ConfusionMatrix, HandEnumeration) {
  // "a" plays the positive class, "b" the negative one.
  std::vector<ClassificationTrial> trials = {ctrial("a", {{"a", 1}, {"b", 0}}), ctrial("a", {{"a", 0}, {"b", 1}}),
                                             ctrial("b", {{"a", 0}, {"b", 1}})};
  auto cm = confusion_matrix(trials);
  EXPECT_EQ(cm, ConfusionMatrix({CohortLabel("a"), CohortLabel("b")}, {{1, 1}, {0, 1}}));
  auto o = oracle::confusion(trials);
  EXPECT_EQ(o["a"]["a"], 1u);
  EXPECT_EQ(o["a"]["b"], 1u);
  EXPECT_EQ(o["b"]["a"], 0u);
  EXPECT_EQ(o["b"]["b"], 1u);
  EXPECT_DOUBLE_EQ(accuracy(cm), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(oracle::accuracy(trials), 2.0 / 3.0);
}

TEST(ConfusionMatrix, PerfectIsDiagonal) {
  std::vector<ClassificationTrial> trials;
  for (const char* l : {"x", "y", "z", "x"}) {
    std::map<std::string, double> scores = {{"x", 0}, {"y", 0}, {"z", 0}};
    scores[l] = 1;
    trials.push_back(ctrial(l, scores));
  }
  auto cm = confusion_matrix(trials);
  EXPECT_EQ(cm.trace(), 4u);
  EXPECT_EQ(cm.total(), 4u);
  EXPECT_DOUBLE_EQ(accuracy(cm), 1.0);
  EXPECT_DOUBLE_EQ(sensitivity_macro(cm), 1.0);
  EXPECT_DOUBLE_EQ(specificity_macro(cm), 1.0);
}

TEST(ConfusionMatrix, RowNormalizedSumsToOne) {
  std::mt19937_64 rng(11);
  auto trials = oracle::random_classification(rng, 200, 5);
  auto cm = confusion_matrix(trials);
  auto norm = cm.row_normalized();
  for (std::size_t i = 0; i < cm.size(); ++i) {
    if (cm.row_sum(i) == 0) continue;
    double s = 0;
    for (double v : norm[i]) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(ConfusionMatrix, InconsistentUniverse) {
  std::vector<ClassificationTrial> trials = {ctrial("a", {{"a", 1}, {"b", 0}}),
                                             ctrial("a", {{"a", 1}, {"c", 0}})};
  EXPECT_THROW(confusion_matrix(trials), InvariantError);
  EXPECT_THROW(confusion_matrix(std::vector<ClassificationTrial>{}), PreconditionError);
}

TEST(Accuracy, ZeroDiagonal) {
  ConfusionMatrix cm({CohortLabel("a"), CohortLabel("b")}, {{0, 3}, {2, 0}});
  EXPECT_DOUBLE_EQ(accuracy(cm), 0.0);
  EXPECT_THROW(accuracy(ConfusionMatrix({CohortLabel("a"), CohortLabel("b")})), PreconditionError);
}

TEST(SensitivitySpecificity, PerClassHandComputation) {
  ConfusionMatrix cm({CohortLabel("a"), CohortLabel("b")}, {{1, 1}, {0, 2}});
  // recall: a = 1/2, b = 2/2; TNR: a = 2/2, b = 1/2
  EXPECT_DOUBLE_EQ(sensitivity_macro(cm), 0.75);
  EXPECT_DOUBLE_EQ(specificity_macro(cm), 0.75);
}

TEST(SensitivitySpecificity, BalancedRecallEqualsAccuracy) {
  ConfusionMatrix cm({CohortLabel("a"), CohortLabel("b"), CohortLabel("c")}, {{7, 2, 1}, {3, 5, 2}, {0, 1, 9}});
  EXPECT_NEAR(sensitivity_macro(cm), accuracy(cm), 1e-12);
}

TEST(SensitivitySpecificity, SingleClassSpecificityRejected) {
  ConfusionMatrix cm({CohortLabel("only")}, {{4}});
  EXPECT_THROW(specificity_macro(cm), PreconditionError);
  EXPECT_DOUBLE_EQ(sensitivity_macro(cm), 1.0);
}

TEST(SensitivitySpecificity, ZeroSupportExcludedWithDiagnostic) {
  ConfusionMatrix cm({CohortLabel("a"), CohortLabel("b"), CohortLabel("c")}, {{3, 1, 0}, {0, 0, 0}, {1, 0, 1}});
  auto se = sensitivity_macro_detail(cm);
  ASSERT_EQ(se.excluded.size(), 1u);
  EXPECT_EQ(se.excluded[0], CohortLabel("b"));
  EXPECT_DOUBLE_EQ(se.value, (0.75 + 0.5) / 2.0);
  // every label still has negatives, so specificity keeps all three
  EXPECT_TRUE(specificity_macro_detail(cm).excluded.empty());
}

TEST(RiskError, BalancedCostWorkedExamples) {
  RiskParams balanced{1.0, 1.0};
  EXPECT_NEAR(risk_from_rates(0.9679, 0.9918, balanced), 0.0403, 1e-12);
  EXPECT_NEAR(risk_from_rates(0.9420, 0.9803, balanced), 0.0777, 1e-12);
}

TEST(RiskError, ZeroAndLinearCosts) {
  EXPECT_DOUBLE_EQ(risk_error(0.3, 0.8, RiskParams{0.0, 0.0}), 0.0);
  EXPECT_NEAR(risk_from_rates(0.9, 0.4, RiskParams{2.0, 0.0}), 0.2, 1e-12);
  EXPECT_NEAR(risk_error(0.1, 0.2, RiskParams{3.0, 5.0}), 0.3 + 1.0, 1e-12);
}

TEST(RiskError, Errors) {
  EXPECT_THROW(risk_error(1.1, 0.0, {}), PreconditionError);
  EXPECT_THROW(risk_error(0.1, -0.1, {}), PreconditionError);
  EXPECT_THROW(risk_error(0.1, 0.1, RiskParams{-1.0, 1.0}), PreconditionError);
  EXPECT_THROW(risk_error(0.1, 0.1, RiskParams{1.0, INFINITY}), PreconditionError);
  EXPECT_THROW(risk_from_rates(NAN, 0.5, {}), PreconditionError);
}

TEST(BiasTrust, CrossModalityExample) {
  EXPECT_NEAR(bias_trust(1.0000, 0.9358), -0.0642, 1e-12);
  EXPECT_DOUBLE_EQ(bias_trust(0.42, 0.42), 0.0);
  EXPECT_DOUBLE_EQ(bias_trust(0.3, 0.8), -bias_trust(0.8, 0.3));
  EXPECT_THROW(bias_trust(1.2, 0.5), PreconditionError);
}

TEST(AggregateMeanStd, Conventions) {
  auto flat = aggregate_mean_std({0.5, 0.5, 0.5});
  EXPECT_DOUBLE_EQ(flat.mean, 0.5);
  EXPECT_DOUBLE_EQ(flat.std, 0.0);
  auto pair = aggregate_mean_std({0.0, 1.0});
  EXPECT_DOUBLE_EQ(pair.mean, 0.5);
  EXPECT_DOUBLE_EQ(pair.std, 0.5);
  EXPECT_THROW(aggregate_mean_std({}), PreconditionError);
}

TEST(AggregateMeanStd, MatchesIndependentRecomputation) {
  std::vector<double> folds = {0.9120, 0.9655, 0.8873, 0.9934, 0.9401};
  // second pass: long double, E[x^2] - E[x]^2 form
  long double s = 0, s2 = 0;
  for (double v : folds) {
    s += v;
    s2 += static_cast<long double>(v) * v;
  }
  const long double mean = s / folds.size();
  const long double var = s2 / folds.size() - mean * mean;
  auto m = aggregate_mean_std(folds);
  EXPECT_NEAR(m.mean, static_cast<double>(mean), 1e-15);
  EXPECT_NEAR(m.std, std::sqrt(static_cast<double>(var)), 1e-9);
  EXPECT_EQ(m.fold_values, folds);
}

TEST(CohortDecomposition, TuftsEmotionAverages) {
  auto d = cohort_decomposition({{CohortLabel("neutral"), 0.8103},
                                 {CohortLabel("smile"), 0.8281},
                                 {CohortLabel("sleepy"), 0.8281},
                                 {CohortLabel("shock"), 0.8616},
                                 {CohortLabel("sunglasses"), 0.9866}});
  EXPECT_NEAR(d.overall, 0.8629, 1e-4);
  EXPECT_EQ(d.bias_for, CohortLabel("sunglasses"));
  EXPECT_EQ(d.bias_against, CohortLabel("neutral"));
}

TEST(CohortDecomposition, SingleAndTied) {
  auto one = cohort_decomposition({{CohortLabel("x"), 0.4}});
  EXPECT_DOUBLE_EQ(one.overall, 0.4);
  EXPECT_EQ(one.bias_for, one.bias_against);
  auto tied = cohort_decomposition({{CohortLabel("m"), 0.7}, {CohortLabel("b"), 0.7}, {CohortLabel("z"), 0.7}});
  EXPECT_EQ(tied.bias_for, CohortLabel("b"));
  EXPECT_EQ(tied.bias_against, CohortLabel("b"));
  EXPECT_THROW(cohort_decomposition({}), PreconditionError);
}

}  // namespace
}  // namespace rtb
