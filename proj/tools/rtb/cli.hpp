#pragma once

// Command-line front end. Kept in a header so the test suite can drive the
// exact same code in-process.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rtb/rtb.hpp"

namespace rtb::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kParseFailure = 2,
  kInvariantViolation = 3,
  kPreconditionFailure = 4,
  kIoFailure = 5,
  kInternal = 10,
};

inline constexpr const char* kWorkdirEnv = "RTB_WORKDIR";

struct DatasetArgs {
  std::string dataset_dir;
  std::string manifest;
  std::string embeddings;
  std::string modality;
};

struct ExecArgs {
  bool deterministic = false;
  std::size_t workers = 0;  // 0 = hardware concurrency

  std::size_t worker_count() const {
    if (deterministic) return 1;
    return workers == 0 ? default_worker_count() : workers;
  }
};

inline fs::path default_workdir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kWorkdirEnv); env != nullptr && *env != '\0') return env;
  return fs::current_path();
}

inline DatasetManifest load(const DatasetArgs& a) {
  if (!a.dataset_dir.empty()) return load_dataset_dir(a.dataset_dir);
  if (a.manifest.empty()) throw PreconditionError("pass --dataset DIR or --manifest FILE [--embeddings FILE]");
  std::optional<fs::path> emb;
  if (!a.embeddings.empty()) emb = a.embeddings;
  return load_dataset(a.manifest, emb).manifest;
}

/// Restricts to one modality: the requested one, or the only one present.
inline DatasetManifest single_modality(const DatasetManifest& m, const std::string& requested) {
  if (!requested.empty()) {
    Modality want(requested);
    if (std::find(m.modalities().begin(), m.modalities().end(), want) == m.modalities().end())
      throw PreconditionError("dataset has no " + want.tag() + " samples");
    return m.select_modality(want);
  }
  if (m.modalities().size() == 1) return m;
  std::string names;
  for (const auto& x : m.modalities()) names += (names.empty() ? "" : ", ") + x.tag();
  throw PreconditionError("dataset has several modalities (" + names + "); choose one with --modality");
}

inline nlohmann::json dataset_parameters(const DatasetManifest& m) {
  auto info = dataset_info(m);
  info.erase("schema");
  return info;
}

inline void add_dataset_options(CLI::App* cmd, DatasetArgs& a) {
  cmd->add_option("--dataset", a.dataset_dir, "Dataset directory (from `generate` or `ingest`)");
  cmd->add_option("--manifest", a.manifest, "Manifest CSV (alternative to --dataset)");
  cmd->add_option("--embeddings", a.embeddings, "Embeddings JSONL used with --manifest");
  cmd->add_option("--modality", a.modality, "Restrict to one modality");
}

inline void add_exec_options(CLI::App* cmd, ExecArgs& e) {
  cmd->add_flag("--deterministic", e.deterministic, "Run on a single worker (results are identical either way)");
  cmd->add_option("--workers", e.workers, "Worker threads (default: hardware concurrency)");
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

inline int cmd_generate(const GenerateArgs& a, const fs::path& workdir, std::ostream& out) {
  SynthConfig config = a.config.empty() ? SynthConfig{} : read_synth_config(a.config);
  if (a.seed) config.seed = *a.seed;
  auto manifest = generate(config);
  fs::path dir = a.out.empty() ? workdir / "generated" : fs::path(a.out);
  write_dataset_dir(dir, manifest);
  out << "generated " << manifest.size() << " samples, " << manifest.subject_count() << " subjects, dim "
      << manifest.feature_dim() << " -> " << dir.string() << "\n";
  return kOk;
}

struct IngestArgs {
  std::string manifest;
  std::string embeddings;
  std::string name = "dataset";
  std::size_t max_per_combination = 0;
};

inline int cmd_ingest(const IngestArgs& a, const fs::path& workdir, std::ostream& out) {
  ManifestOptions opts;
  opts.max_per_combination = a.max_per_combination;
  std::optional<fs::path> emb;
  if (!a.embeddings.empty()) emb = a.embeddings;
  auto result = load_dataset(a.manifest, emb, opts);
  fs::path dir = workdir / "datasets" / a.name;
  write_dataset_dir(dir, result.manifest);
  out << "ingested " << result.manifest.size() << " samples, " << result.manifest.subject_count()
      << " subjects, dim " << result.manifest.feature_dim() << " -> " << dir.string() << "\n";
  return kOk;
}

struct IdentifyArgs {
  DatasetArgs data;
  ExecArgs exec;
  std::string mode;
  std::string ranks = "1,5,10";
  std::size_t max_rank = 10;
  std::string metric = "auto";
  std::string out;
};

inline std::vector<std::size_t> parse_ranks(const std::string& text) {
  std::vector<std::size_t> ranks;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = detail::trim(tok);
    if (tok.empty()) continue;
    std::size_t used = 0;
    std::size_t r = 0;
    try {
      r = std::stoul(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || r == 0) throw ParseError("--ranks: '" + tok + "' is not a positive integer");
    ranks.push_back(r);
  }
  if (ranks.empty()) throw ParseError("--ranks is empty");
  return ranks;
}

inline int cmd_identify(const IdentifyArgs& a, const fs::path& workdir, std::ostream& out) {
  auto dataset = load(a.data);
  ProtocolOptions opts;
  opts.workers = a.exec.worker_count();
  opts.cmc_max_rank = a.max_rank;
  NearestCentroidClassifier classifier;
  if (a.metric != "auto") opts.config = parse_distance_metric(a.metric) == DistanceMetric::kCosine ? 0 : 1;

  EvaluationReport report;
  report.run.command = "identify";
  report.run.mode = a.mode;
  report.run.parameters = {{"dataset", dataset_parameters(dataset)}, {"metric", a.metric}, {"max_rank", a.max_rank}};
  fs::path dir = a.out.empty() ? workdir / ("identify-" + a.mode) : fs::path(a.out);

  std::vector<std::pair<std::string, std::string>> files;
  if (a.mode == "emotion-fold") {
    auto data = single_modality(dataset, a.data.modality);
    report.run.parameters["modality"] = data.modalities().front().tag();
    auto result = emotion_fold_identification(data, classifier, opts);
    report.reliability = result.matrix;
    report.cohort_bias = cohort_decomposition(result.matrix.averages_by_label());
    report.cmc = result.cmc;
    report.run.parameters["selected_config"] = result.selected_config;
    files.emplace_back("reliability_matrix.csv", render_reliability_csv(result.matrix, "test/validation", true));
    files.emplace_back("cmc.csv", render_cmc_csv(result.cmc, "test", "validation"));
    out << "emotion-fold reliability (rank-1 TPIR), overall " << fixed(report.cohort_bias->overall, 4)
        << ", bias for " << report.cohort_bias->bias_for.name() << ", bias against "
        << report.cohort_bias->bias_against.name() << "\n";
  } else if (a.mode == "cross-modality") {
    auto ranks = parse_ranks(a.ranks);
    if (!a.data.modality.empty()) throw PreconditionError("--modality does not apply to cross-modality mode");
    auto result = cross_modality_identification(dataset, classifier, ranks, opts);
    report.cube = result.cube;
    report.cmc = result.cmc;
    report.run.parameters["ranks"] = result.cube.ranks;
    report.run.parameters["metric_used"] = classifier.config_name(opts.config.value_or(classifier.default_config()));
    for (std::size_t r = 0; r < result.cube.ranks.size(); ++r)
      files.emplace_back("reliability_rank" + std::to_string(result.cube.ranks[r]) + ".csv",
                         render_reliability_csv(result.cube.panel(r), "train/test", false));
    files.emplace_back("cmc.csv", render_cmc_csv(result.cmc, "train", "test"));
    out << "cross-modality reliability over " << result.cube.modalities.size() << " modalities at ranks "
        << a.ranks << "\n";
  } else {
    throw PreconditionError("unknown identify mode '" + a.mode + "' (use emotion-fold or cross-modality)");
  }

  write_report(dir / "report.json", report);
  for (const auto& [name, content] : files) detail::write_file(dir / name, content);
  out << "wrote " << (dir / "report.json").string() << "\n";
  return kOk;
}

struct ClassifyArgs {
  DatasetArgs data;
  ExecArgs exec;
  std::string labels;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::string metric = "cosine";
  double alpha = 1.0;
  double beta = 1.0;
  std::string run_label;
  std::string out;
};

inline int cmd_classify(const ClassifyArgs& a, const fs::path& workdir, std::ostream& out) {
  auto data = single_modality(load(a.data), a.data.modality);
  std::vector<CohortLabel> labels;
  if (a.labels.empty()) {
    labels = data.cohorts();
  } else {
    std::stringstream ss(a.labels);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!detail::trim(tok).empty()) labels.emplace_back(tok);
  }
  ProtocolOptions opts;
  opts.workers = a.exec.worker_count();
  NearestCentroidClassifier classifier({parse_distance_metric(a.metric)});
  auto outcome = subject_fold_classification(data, classifier, a.k, a.seed, labels, opts);

  EvaluationReport report;
  report.run.command = "classify";
  report.run.mode = "subject-fold";
  report.run.seed = a.seed;
  std::vector<std::string> names;
  for (const auto& l : outcome.labels) names.push_back(l.name());
  report.run.parameters = {{"dataset", dataset_parameters(data)},
                           {"modality", data.modalities().front().tag()},
                           {"labels", names},
                           {"k", a.k},
                           {"metric", to_string(parse_distance_metric(a.metric))},
                           {"fold_subjects", outcome.fold_subjects}};
  report.accuracy = outcome.accuracy;
  report.sensitivity = outcome.sensitivity;
  report.specificity = outcome.specificity;
  report.confusion = outcome.pooled;
  report.diagnostics = outcome.diagnostics;
  report.risk.push_back(make_risk_entry(report, RiskParams{a.alpha, a.beta}));

  const std::string run_label = a.run_label.empty()
                                    ? data.modalities().front().tag() + ":" + std::to_string(names.size())
                                    : a.run_label;
  fs::path dir = a.out.empty() ? workdir / "classify" : fs::path(a.out);
  write_report(dir / "report.json", report);
  detail::write_file(dir / "metrics.csv", render_metrics_csv(report, run_label));
  detail::write_file(dir / "confusion_counts.csv", render_confusion_counts_csv(outcome.pooled));
  detail::write_file(dir / "confusion_percent.csv", render_confusion_percent_csv(outcome.pooled));

  out << run_label << "  accuracy " << format_summary(outcome.accuracy) << "  sensitivity "
      << format_summary(outcome.sensitivity) << "  specificity " << format_summary(outcome.specificity) << "\n";
  out << "risk " << fixed(report.risk.back().value, 4) << " (alpha=" << a.alpha << ", beta=" << a.beta << ")\n";
  for (const auto& d : outcome.diagnostics) out << "note: " << d << "\n";
  out << "wrote " << (dir / "report.json").string() << "\n";
  return kOk;
}

struct RiskArgs {
  std::string report;
  double alpha = 1.0;
  double beta = 1.0;
};

inline int cmd_risk(const RiskArgs& a, std::ostream& out) {
  auto report = read_report(a.report);
  auto entry = make_risk_entry(report, RiskParams{a.alpha, a.beta});
  report.risk.push_back(entry);
  write_report(a.report, report);
  out << "risk " << fixed(entry.value, 4) << " (alpha=" << a.alpha << ", beta=" << a.beta
      << ", sensitivity=" << fixed(entry.sensitivity, 4) << ", specificity=" << fixed(entry.specificity, 4)
      << ")\n";
  return kOk;
}

struct TrustArgs {
  std::string report;
  std::string base;
  std::string target;
};

inline int cmd_trust(const TrustArgs& a, std::ostream& out) {
  auto report = read_report(a.report);
  auto entry = make_trust_entry(report, parse_condition(a.base), parse_condition(a.target));
  report.trust.push_back(entry);
  write_report(a.report, report);
  const char* note = entry.value > 0 ? "gain of trust" : entry.value < 0 ? "loss of trust" : "no change";
  out << "bias_trust " << entry.base << " -> " << entry.target << " = " << fixed(entry.value, 4) << " (" << note
      << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Risk, trust and bias evaluation for biometric decision support"};
  app.require_subcommand(1);
  std::string workdir_flag;
  app.add_option("--workdir", workdir_flag, std::string("Working directory (default: $") + kWorkdirEnv + " or cwd)");

  GenerateArgs gen;
  auto* generate_cmd = app.add_subcommand("generate", "Write a synthetic dataset");
  generate_cmd->add_option("--config", gen.config, "Synthetic config JSON");
  generate_cmd->add_option("--out", gen.out, "Output dataset directory");
  generate_cmd->add_option("--seed", gen.seed, "Override the config seed");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a manifest + embeddings and store the dataset");
  ingest_cmd->add_option("--manifest", ingest.manifest, "Manifest CSV")->required();
  ingest_cmd->add_option("--embeddings", ingest.embeddings, "Embeddings JSONL");
  ingest_cmd->add_option("--name", ingest.name, "Dataset name under <workdir>/datasets");
  ingest_cmd->add_option("--max-per-combination", ingest.max_per_combination,
                         "Max samples per (subject, modality, cohort); 0 = unlimited");

  IdentifyArgs ident;
  auto* identify_cmd = app.add_subcommand("identify", "Run an identification protocol");
  add_dataset_options(identify_cmd, ident.data);
  add_exec_options(identify_cmd, ident.exec);
  identify_cmd->add_option("--mode", ident.mode, "emotion-fold | cross-modality")
      ->required()
      ->check(CLI::IsMember({"emotion-fold", "cross-modality"}));
  identify_cmd->add_option("--ranks", ident.ranks, "Comma-separated ranks for cross-modality panels");
  identify_cmd->add_option("--max-rank", ident.max_rank, "Highest rank in CMC output");
  identify_cmd->add_option("--metric", ident.metric, "auto | cosine | euclidean")
      ->check(CLI::IsMember({"auto", "cosine", "euclidean"}));
  identify_cmd->add_option("--out", ident.out, "Output directory");

  ClassifyArgs cls;
  auto* classify_cmd = app.add_subcommand("classify", "Subject-fold cohort classification");
  add_dataset_options(classify_cmd, cls.data);
  add_exec_options(classify_cmd, cls.exec);
  classify_cmd->add_option("--labels", cls.labels, "Comma-separated label set (default: all cohorts)");
  classify_cmd->add_option("--k", cls.k, "Number of subject folds");
  classify_cmd->add_option("--seed", cls.seed, "Fold assignment seed");
  classify_cmd->add_option("--metric", cls.metric, "cosine | euclidean")
      ->check(CLI::IsMember({"cosine", "euclidean"}));
  classify_cmd->add_option("--alpha", cls.alpha, "Cost of a false non-match");
  classify_cmd->add_option("--beta", cls.beta, "Cost of a false match");
  classify_cmd->add_option("--run-label", cls.run_label, "Row label in metrics.csv (default MODALITY:N)");
  classify_cmd->add_option("--out", cls.out, "Output directory");

  RiskArgs risk;
  auto* risk_cmd = app.add_subcommand("risk", "Risk of error from a classification report");
  risk_cmd->add_option("--report", risk.report, "report.json")->required();
  risk_cmd->add_option("--alpha", risk.alpha, "Cost of a false non-match");
  risk_cmd->add_option("--beta", risk.beta, "Cost of a false match");

  TrustArgs trust;
  auto* trust_cmd = app.add_subcommand("trust", "Trust change between two reliability cells");
  trust_cmd->add_option("--report", trust.report, "report.json")->required();
  trust_cmd->add_option("--base", trust.base, "Base condition ROW/COL[@RANK]")->required();
  trust_cmd->add_option("--target", trust.target, "Target condition ROW/COL[@RANK]")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const auto workdir = default_workdir(workdir_flag);
    if (generate_cmd->parsed()) return cmd_generate(gen, workdir, out);
    if (ingest_cmd->parsed()) return cmd_ingest(ingest, workdir, out);
    if (identify_cmd->parsed()) return cmd_identify(ident, workdir, out);
    if (classify_cmd->parsed()) return cmd_classify(cls, workdir, out);
    if (risk_cmd->parsed()) return cmd_risk(risk, out);
    if (trust_cmd->parsed()) return cmd_trust(trust, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.diagnostics().size() << " rejected row(s)\n";
    for (const auto& d : e.diagnostics()) err << "  " << d.describe() << "\n";
    return kInvariantViolation;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParseFailure;
  } catch (const InvariantError& e) {
    err << "invalid data: " << e.what() << "\n";
    return kInvariantViolation;
  } catch (const PreconditionError& e) {
    err << "cannot run: " << e.what() << "\n";
    return kPreconditionFailure;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace rtb::cli
