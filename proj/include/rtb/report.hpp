#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rtb/io.hpp"
#include "rtb/metrics.hpp"
#include "rtb/protocols.hpp"

namespace rtb {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kReportSchema = "rtb.report/1";

struct RunMetadata {
  std::string tool_version = kToolVersion;
  std::string command;
  std::string mode;
  std::uint64_t seed = 0;
  nlohmann::json parameters = nlohmann::json::object();

  friend bool operator==(const RunMetadata&, const RunMetadata&) = default;
};

/// Risk evaluated from the report's own sensitivity and specificity.
struct RiskEntry {
  RiskParams params;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double value = 0.0;

  friend bool operator==(const RiskEntry&, const RiskEntry&) = default;
};

/// Trust change between two reliability cells, with the cell values it was
/// computed from.
struct TrustEntry {
  std::string base;
  std::string target;
  double base_reliability = 0.0;
  double target_reliability = 0.0;
  double value = 0.0;

  friend bool operator==(const TrustEntry&, const TrustEntry&) = default;
};

/// Everything a protocol run produced: the risk, trust-change and bias
/// measures together with the primitives they were derived from.
struct EvaluationReport {
  RunMetadata run;
  std::optional<MetricSummary> accuracy;
  std::optional<MetricSummary> sensitivity;
  std::optional<MetricSummary> specificity;
  std::vector<RiskEntry> risk;
  std::vector<TrustEntry> trust;
  std::optional<ReliabilityMatrix> reliability;
  std::optional<CohortDecomposition> cohort_bias;
  std::optional<RankedReliabilityCube> cube;
  std::optional<ConfusionMatrix> confusion;
  std::vector<CmcSeries> cmc;
  std::vector<std::string> diagnostics;

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const MetricSummary& m) {
  j = {{"mean", m.mean}, {"std", m.std}, {"folds", m.fold_values}};
}
inline void from_json(const nlohmann::json& j, MetricSummary& m) {
  j.at("mean").get_to(m.mean);
  j.at("std").get_to(m.std);
  j.at("folds").get_to(m.fold_values);
}

inline void to_json(nlohmann::json& j, const ReliabilityMatrix& m) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& row : m.cells) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& c : row) r.push_back(opt(c));
    cells.push_back(r);
  }
  nlohmann::json avg = nlohmann::json::array();
  for (const auto& a : m.averages) avg.push_back(opt(a));
  j = {{"rows", m.row_labels}, {"columns", m.col_labels}, {"cells", cells}, {"averages", avg}};
}
inline void from_json(const nlohmann::json& j, ReliabilityMatrix& m) {
  auto opt = [](const nlohmann::json& v) {
    return v.is_null() ? std::optional<double>() : std::optional<double>(v.get<double>());
  };
  j.at("rows").get_to(m.row_labels);
  j.at("columns").get_to(m.col_labels);
  m.cells.clear();
  for (const auto& row : j.at("cells")) {
    std::vector<std::optional<double>> r;
    for (const auto& c : row) r.push_back(opt(c));
    m.cells.push_back(std::move(r));
  }
  m.averages.clear();
  for (const auto& a : j.at("averages")) m.averages.push_back(opt(a));
}

inline void to_json(nlohmann::json& j, const RankedReliabilityCube& c) {
  j = {{"ranks", c.ranks}, {"modalities", c.modalities}, {"values", c.values}};
}
inline void from_json(const nlohmann::json& j, RankedReliabilityCube& c) {
  j.at("ranks").get_to(c.ranks);
  j.at("modalities").get_to(c.modalities);
  j.at("values").get_to(c.values);
}

inline void to_json(nlohmann::json& j, const ConfusionMatrix& cm) {
  std::vector<std::string> labels;
  for (const auto& l : cm.labels()) labels.push_back(l.name());
  std::vector<std::vector<std::uint64_t>> counts(cm.size(), std::vector<std::uint64_t>(cm.size()));
  for (std::size_t i = 0; i < cm.size(); ++i)
    for (std::size_t k = 0; k < cm.size(); ++k) counts[i][k] = cm.at(i, k);
  j = {{"labels", labels}, {"counts", counts}};
}
inline void from_json(const nlohmann::json& j, ConfusionMatrix& cm) {
  std::vector<CohortLabel> labels;
  for (const auto& l : j.at("labels")) labels.emplace_back(l.get<std::string>());
  cm = ConfusionMatrix(std::move(labels), j.at("counts").get<std::vector<std::vector<std::uint64_t>>>());
}

inline void to_json(nlohmann::json& j, const CmcSeries& s) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : s.points) pts.push_back({p.rank, p.tpir});
  j = {{"row", s.row}, {"col", s.col}, {"points", pts}};
}
inline void from_json(const nlohmann::json& j, CmcSeries& s) {
  j.at("row").get_to(s.row);
  j.at("col").get_to(s.col);
  s.points.clear();
  for (const auto& p : j.at("points")) s.points.push_back({p.at(0).get<std::size_t>(), p.at(1).get<double>()});
}

inline nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["schema"] = kReportSchema;
  j["run"] = {{"tool_version", r.run.tool_version},
              {"command", r.run.command},
              {"mode", r.run.mode},
              {"seed", r.run.seed},
              {"parameters", r.run.parameters}};
  nlohmann::json metrics = nlohmann::json::object();
  if (r.accuracy) metrics["accuracy"] = *r.accuracy;
  if (r.sensitivity) metrics["sensitivity"] = *r.sensitivity;
  if (r.specificity) metrics["specificity"] = *r.specificity;
  j["metrics"] = metrics;
  j["risk"] = nlohmann::json::array();
  for (const auto& e : r.risk)
    j["risk"].push_back({{"alpha", e.params.alpha},
                         {"beta", e.params.beta},
                         {"sensitivity", e.sensitivity},
                         {"specificity", e.specificity},
                         {"value", e.value}});
  j["trust"] = nlohmann::json::array();
  for (const auto& e : r.trust)
    j["trust"].push_back({{"base", e.base},
                          {"target", e.target},
                          {"base_reliability", e.base_reliability},
                          {"target_reliability", e.target_reliability},
                          {"value", e.value}});
  j["reliability_matrix"] = r.reliability ? nlohmann::json(*r.reliability) : nlohmann::json(nullptr);
  if (r.cohort_bias)
    j["cohort_bias"] = {{"overall", r.cohort_bias->overall},
                        {"bias_for", {{"cohort", r.cohort_bias->bias_for.name()}, {"value", r.cohort_bias->for_value}}},
                        {"bias_against",
                         {{"cohort", r.cohort_bias->bias_against.name()}, {"value", r.cohort_bias->against_value}}}};
  else
    j["cohort_bias"] = nullptr;
  j["reliability_cube"] = r.cube ? nlohmann::json(*r.cube) : nlohmann::json(nullptr);
  j["confusion_matrix"] = r.confusion ? nlohmann::json(*r.confusion) : nlohmann::json(nullptr);
  j["cmc"] = r.cmc;
  j["diagnostics"] = r.diagnostics;
  return j;
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  try {
    if (j.at("schema") != kReportSchema) throw ParseError("unsupported report schema " + j.at("schema").dump());
    const auto& run = j.at("run");
    run.at("tool_version").get_to(r.run.tool_version);
    run.at("command").get_to(r.run.command);
    run.at("mode").get_to(r.run.mode);
    run.at("seed").get_to(r.run.seed);
    r.run.parameters = run.at("parameters");
    const auto& metrics = j.at("metrics");
    if (metrics.contains("accuracy")) r.accuracy = metrics["accuracy"].get<MetricSummary>();
    if (metrics.contains("sensitivity")) r.sensitivity = metrics["sensitivity"].get<MetricSummary>();
    if (metrics.contains("specificity")) r.specificity = metrics["specificity"].get<MetricSummary>();
    for (const auto& e : j.at("risk"))
      r.risk.push_back({{e.at("alpha").get<double>(), e.at("beta").get<double>()},
                        e.at("sensitivity").get<double>(),
                        e.at("specificity").get<double>(),
                        e.at("value").get<double>()});
    for (const auto& e : j.at("trust"))
      r.trust.push_back({e.at("base").get<std::string>(), e.at("target").get<std::string>(),
                         e.at("base_reliability").get<double>(), e.at("target_reliability").get<double>(),
                         e.at("value").get<double>()});
    if (!j.at("reliability_matrix").is_null()) r.reliability = j["reliability_matrix"].get<ReliabilityMatrix>();
    if (const auto& cb = j.at("cohort_bias"); !cb.is_null()) {
      CohortDecomposition d;
      d.overall = cb.at("overall").get<double>();
      d.bias_for = CohortLabel(cb.at("bias_for").at("cohort").get<std::string>());
      d.for_value = cb.at("bias_for").at("value").get<double>();
      d.bias_against = CohortLabel(cb.at("bias_against").at("cohort").get<std::string>());
      d.against_value = cb.at("bias_against").at("value").get<double>();
      r.cohort_bias = d;
    }
    if (!j.at("reliability_cube").is_null()) r.cube = j["reliability_cube"].get<RankedReliabilityCube>();
    if (!j.at("confusion_matrix").is_null()) r.confusion = j["confusion_matrix"].get<ConfusionMatrix>();
    j.at("cmc").get_to(r.cmc);
    j.at("diagnostics").get_to(r.diagnostics);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
  return r;
}

inline std::string format_report(const EvaluationReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline EvaluationReport parse_report(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return report_from_json(j);
}

inline void write_report(const std::filesystem::path& path, const EvaluationReport& r) {
  detail::write_file(path, format_report(r));
}

inline EvaluationReport read_report(const std::filesystem::path& path) {
  return parse_report(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Conditions and derived values
// ---------------------------------------------------------------------------

/// Parses "ROW/COL" or "ROW/COL@RANK" (rank defaults to 1). For a
/// cross-modality cube ROW/COL are train/test modalities; for an emotion-fold
/// matrix they are test/validation cohorts.
inline Condition parse_condition(const std::string& text) {
  Condition c;
  std::string body = text;
  if (auto at = body.find('@'); at != std::string::npos) {
    auto rank = detail::trim(body.substr(at + 1));
    try {
      std::size_t used = 0;
      c.rank = std::stoul(rank, &used);
      if (used != rank.size() || c.rank == 0) throw std::invalid_argument(rank);
    } catch (const std::exception&) {
      throw ParseError("condition '" + text + "': rank must be a positive integer");
    }
    body = body.substr(0, at);
  }
  auto slash = body.find('/');
  if (slash == std::string::npos) throw ParseError("condition '" + text + "' must look like ROW/COL or ROW/COL@RANK");
  c.train = detail::trim(body.substr(0, slash));
  c.test = detail::trim(body.substr(slash + 1));
  if (c.train.empty() || c.test.empty()) throw ParseError("condition '" + text + "' has an empty side");
  return c;
}

inline std::string format_condition(const Condition& c) {
  return c.train + "/" + c.test + "@" + std::to_string(c.rank);
}

/// Reliability stored in the report for a condition.
inline double reliability_at(const EvaluationReport& r, const Condition& c) {
  if (r.cube) return r.cube->at(c.train, c.test, c.rank);
  if (r.reliability) {
    if (c.rank != 1) throw PreconditionError("emotion-fold matrices hold rank-1 values only");
    const auto& m = *r.reliability;
    auto find = [](const std::vector<std::string>& labels, const std::string& name) {
      const auto canon = CohortLabel(name).name();
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == canon) return i;
      throw PreconditionError("unknown condition '" + name + "'");
    };
    const auto& cell = m.cells.at(find(m.row_labels, c.train)).at(find(m.col_labels, c.test));
    if (!cell) throw PreconditionError("cell " + c.train + "/" + c.test + " is excluded from the matrix");
    return *cell;
  }
  throw PreconditionError("report holds no reliability matrix or cube");
}

inline TrustEntry make_trust_entry(const EvaluationReport& r, const Condition& base, const Condition& target) {
  TrustEntry e;
  e.base = format_condition(base);
  e.target = format_condition(target);
  e.base_reliability = reliability_at(r, base);
  e.target_reliability = reliability_at(r, target);
  e.value = bias_trust(e.base_reliability, e.target_reliability);
  return e;
}

inline RiskEntry make_risk_entry(const EvaluationReport& r, const RiskParams& params) {
  if (!r.sensitivity || !r.specificity)
    throw PreconditionError("report has no sensitivity/specificity to compute risk from");
  RiskEntry e;
  e.params = params;
  e.sensitivity = r.sensitivity->mean;
  e.specificity = r.specificity->mean;
  e.value = risk_from_rates(e.sensitivity, e.specificity, params);
  return e;
}

/// Recomputes every derived value from the stored primitives. Returns one
/// message per mismatch larger than `tol`.
inline std::vector<std::string> check_consistency(const EvaluationReport& r, double tol = 1e-9) {
  std::vector<std::string> problems;
  auto close = [tol](double a, double b) { return std::abs(a - b) <= tol; };
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };

  for (const auto* m : {&r.accuracy, &r.sensitivity, &r.specificity}) {
    if (!*m || (*m)->fold_values.empty()) continue;
    auto again = aggregate_mean_std((*m)->fold_values);
    check(close(again.mean, (*m)->mean) && close(again.std, (*m)->std), "metric summary does not match its folds");
  }
  if (r.reliability) {
    auto means = r.reliability->column_means();
    check(means.size() == r.reliability->averages.size(), "reliability averages have the wrong length");
    for (std::size_t j = 0; j < std::min(means.size(), r.reliability->averages.size()); ++j) {
      const auto& a = means[j];
      const auto& b = r.reliability->averages[j];
      check(a.has_value() == b.has_value() && (!a || close(*a, *b)),
            "average of column '" + r.reliability->col_labels[j] + "' does not match its cells");
    }
    if (r.cohort_bias) {
      auto d = cohort_decomposition(r.reliability->averages_by_label());
      check(close(d.overall, r.cohort_bias->overall) && d.bias_for == r.cohort_bias->bias_for &&
                d.bias_against == r.cohort_bias->bias_against && close(d.for_value, r.cohort_bias->for_value) &&
                close(d.against_value, r.cohort_bias->against_value),
            "cohort bias does not match the column averages");
    }
  }
  for (const auto& e : r.risk) {
    check(close(e.value, risk_from_rates(e.sensitivity, e.specificity, e.params)),
          "risk value does not match its rates and costs");
    if (r.sensitivity && r.specificity)
      check(close(e.sensitivity, r.sensitivity->mean) && close(e.specificity, r.specificity->mean),
            "risk rates differ from the report's sensitivity/specificity");
  }
  for (const auto& e : r.trust) {
    try {
      auto fresh = make_trust_entry(r, parse_condition(e.base), parse_condition(e.target));
      check(close(fresh.base_reliability, e.base_reliability) && close(fresh.target_reliability, e.target_reliability) &&
                close(fresh.value, e.value),
            "trust delta " + e.base + " -> " + e.target + " does not match the reliability cells");
    } catch (const Error& err) {
      problems.push_back("trust delta " + e.base + " -> " + e.target + ": " + err.what());
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Delimited-text renderings
// ---------------------------------------------------------------------------

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string out = buf;
  // no "-0.00" for values that round to zero
  if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
  return out;
}

/// Matrix as CSV: a header naming the columns, one row per condition, "-"
/// for excluded cells, 4 decimals, and an optional "average" row.
inline std::string render_reliability_csv(const ReliabilityMatrix& m, const std::string& corner,
                                          bool with_average) {
  std::string out = detail::csv_field(corner);
  for (const auto& c : m.col_labels) out += "," + detail::csv_field(c);
  out += "\n";
  for (std::size_t i = 0; i < m.row_labels.size(); ++i) {
    out += detail::csv_field(m.row_labels[i]);
    for (const auto& c : m.cells[i]) out += "," + (c ? fixed(*c, 4) : std::string("-"));
    out += "\n";
  }
  if (with_average) {
    out += "average";
    for (const auto& a : m.averages) out += "," + (a ? fixed(*a, 4) : std::string("-"));
    out += "\n";
  }
  return out;
}

inline std::string render_confusion_counts_csv(const ConfusionMatrix& cm) {
  std::string out = "truth/predicted";
  for (const auto& l : cm.labels()) out += "," + detail::csv_field(l.name());
  out += "\n";
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out += detail::csv_field(cm.labels()[i].name());
    for (std::size_t j = 0; j < cm.size(); ++j) out += "," + std::to_string(cm.at(i, j));
    out += "\n";
  }
  return out;
}

/// Row-normalized percentages, one decimal.
inline std::string render_confusion_percent_csv(const ConfusionMatrix& cm) {
  const auto norm = cm.row_normalized();
  std::string out = "truth/predicted";
  for (const auto& l : cm.labels()) out += "," + detail::csv_field(l.name());
  out += "\n";
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out += detail::csv_field(cm.labels()[i].name());
    for (std::size_t j = 0; j < cm.size(); ++j) out += "," + fixed(100.0 * norm[i][j], 1);
    out += "\n";
  }
  return out;
}

inline std::string render_cmc_csv(const std::vector<CmcSeries>& series, const std::string& row_name,
                                  const std::string& col_name) {
  std::string out = row_name + "," + col_name + ",rank,tpir\n";
  for (const auto& s : series)
    for (const auto& p : s.points)
      out += detail::csv_field(s.row) + "," + detail::csv_field(s.col) + "," + std::to_string(p.rank) + "," +
             fixed(p.tpir, 4) + "\n";
  return out;
}

inline std::string format_summary(const MetricSummary& m) { return fixed(m.mean, 4) + " ± " + fixed(m.std, 4); }

/// Accuracy / sensitivity / specificity as "mean ± std" cells.
inline std::string render_metrics_csv(const EvaluationReport& r, const std::string& run_label) {
  std::string out = "run,accuracy,sensitivity,specificity\n";
  auto cell = [](const std::optional<MetricSummary>& m) { return m ? format_summary(*m) : std::string("-"); };
  out += detail::csv_field(run_label) + "," + cell(r.accuracy) + "," + cell(r.sensitivity) + "," +
         cell(r.specificity) + "\n";
  return out;
}

}  // namespace rtb
