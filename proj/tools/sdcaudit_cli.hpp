#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "sdcaudit/sdcaudit.hpp"

namespace sdcaudit::cli {

/// Exit codes: verdicts map to 0/2/3, anything operational to 1.
inline constexpr int kExitRelease = 0;
inline constexpr int kExitOperational = 1;
inline constexpr int kExitReview = 2;
inline constexpr int kExitReject = 3;

inline int exit_code(Verdict v) {
  switch (v) {
    case Verdict::recommend_release: return kExitRelease;
    case Verdict::recommend_review: return kExitReview;
    case Verdict::recommend_reject: return kExitReject;
  }
  return kExitOperational;
}

struct Options {
  std::string data, schema, preds_in, preds_out, risk_appetite, model_config, attack_config, out_dir;
  std::uint64_t seed = 0;
  std::string timestamp;
  std::string format = "both";
  double test_fraction = 0.3;
};

namespace detail {

inline nlohmann::json read_json(const std::string& path, ErrorCode on_parse_error) {
  try {
    return nlohmann::json::parse(csv::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw AuditError(on_parse_error, "'" + path + "' is not valid JSON: " + e.what());
  }
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

inline void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw AuditError(ErrorCode::Io, "cannot write '" + tmp + "'");
    out << bytes;
    if (!out.flush()) throw AuditError(ErrorCode::Io, "write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw AuditError(ErrorCode::Io, "cannot move '" + tmp + "' into place: " + ec.message());
}

inline std::filesystem::path output_dir(const Options& o) {
  if (o.out_dir.empty()) return {};
  std::error_code ec;
  std::filesystem::create_directories(o.out_dir, ec);
  if (ec) throw AuditError(ErrorCode::Io, "cannot create '" + o.out_dir + "': " + ec.message());
  return o.out_dir;
}

inline ReportMetadata metadata(const Options& o) {
  ReportMetadata meta;
  meta.seed = o.seed;
  meta.timestamp = o.timestamp.empty() ? utc_now() : o.timestamp;
  const std::pair<const char*, const std::string*> inputs[] = {
      {"data", &o.data},          {"schema", &o.schema},       {"preds_in", &o.preds_in},
      {"preds_out", &o.preds_out}, {"risk_appetite", &o.risk_appetite}, {"model_config", &o.model_config},
      {"attack_config", &o.attack_config}};
  for (const auto& [role, path] : inputs) {
    if (!path->empty()) meta.input_digests[role] = sha256_hex(csv::read_file(*path));
  }
  return meta;
}

struct ModelConfig {
  Hyperparameters hyperparameters;
  std::optional<std::string> fitted_digest;
};

inline ModelConfig load_model_config(const Options& o) {
  const auto j = read_json(o.model_config, ErrorCode::InvalidHyperparameter);
  ModelConfig mc;
  mc.hyperparameters = hyperparameters_from_json(j);
  if (!j.contains("seed")) mc.hyperparameters.seed = o.seed;
  if (j.contains("fitted_hyperparameter_digest")) {
    mc.fitted_digest = j["fitted_hyperparameter_digest"].get<std::string>();
  }
  return mc;
}

inline double get_number(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw AuditError(ErrorCode::Usage, std::string("attack config: ") + key + " must be a number");
  return j[key].get<double>();
}

inline std::size_t get_count(const nlohmann::json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_unsigned()) {
    throw AuditError(ErrorCode::Usage, std::string("attack config: ") + key + " must be a non-negative integer");
  }
  return j[key].get<std::size_t>();
}

inline bool get_flag(const nlohmann::json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) throw AuditError(ErrorCode::Usage, std::string("attack config: ") + key + " must be a boolean");
  return j[key].get<bool>();
}

inline WorstCaseConfig worst_case_config(const nlohmann::json& j, std::uint64_t seed) {
  WorstCaseConfig c;
  c.seed = seed;
  c.n_repetitions = get_count(j, "n_repetitions", c.n_repetitions);
  c.attack_test_fraction = get_number(j, "attack_test_fraction", c.attack_test_fraction);
  c.n_baseline = get_count(j, "n_baseline", c.n_baseline);
  c.sort_probabilities = get_flag(j, "sort_probabilities", c.sort_probabilities);
  c.include_correct_feature = get_flag(j, "include_correct_feature", c.include_correct_feature);
  if (j.contains("attack_model")) c.attack_model = hyperparameters_from_json(j["attack_model"]);
  if (j.contains("fpr_levels")) c.fpr_levels = j["fpr_levels"].get<std::vector<double>>();
  c.validate();
  return c;
}

inline LiraConfig lira_config(const nlohmann::json& j, std::uint64_t seed) {
  LiraConfig c;
  c.seed = seed;
  c.n_shadow_models = get_count(j, "n_shadow_models", c.n_shadow_models);
  c.shadow_fraction = get_number(j, "shadow_fraction", c.shadow_fraction);
  c.n_baseline = get_count(j, "n_baseline", c.n_baseline);
  c.sigma_floor = get_number(j, "sigma_floor", c.sigma_floor);
  if (j.contains("shadow_hyperparameters")) c.shadow_hyperparameters = hyperparameters_from_json(j["shadow_hyperparameters"]);
  if (j.contains("fpr_levels")) c.fpr_levels = j["fpr_levels"].get<std::vector<double>>();
  c.validate();
  return c;
}

inline AttributeAttackConfig attribute_config(const nlohmann::json& j, std::uint64_t seed) {
  AttributeAttackConfig c;
  c.seed = seed;
  c.confidence_threshold = get_number(j, "confidence_threshold", c.confidence_threshold);
  c.grid_size = get_count(j, "grid_size", c.grid_size);
  c.protection_band = get_number(j, "protection_band", c.protection_band);
  c.validate();
  return c;
}

/// Attack configs from --attack-config. Without a file every attack in
/// `defaults` runs with default settings; with one, only the listed ones.
inline AttackSuiteConfig attack_suite(const Options& o, const std::vector<std::string>& defaults) {
  nlohmann::json j = nlohmann::json::object();
  bool from_file = false;
  if (!o.attack_config.empty()) {
    j = read_json(o.attack_config, ErrorCode::Usage);
    if (!j.is_object()) throw AuditError(ErrorCode::Usage, "attack config must be a JSON object");
    from_file = true;
  }
  AttackSuiteConfig suite;
  auto wanted = [&](const char* id) {
    const bool allowed = std::find(defaults.begin(), defaults.end(), id) != defaults.end();
    return allowed && (from_file ? j.contains(id) : true);
  };
  auto fragment = [&](const char* id) { return j.contains(id) ? j[id] : nlohmann::json::object(); };
  if (wanted("worst_case")) suite.worst_case = worst_case_config(fragment("worst_case"), o.seed);
  if (wanted("lira")) suite.lira = lira_config(fragment("lira"), o.seed);
  if (wanted("attribute")) suite.attribute = attribute_config(fragment("attribute"), o.seed);
  return suite;
}

inline void emit_report(const Options& o, const ReportDocument& report, std::ostream& out) {
  const auto dir = output_dir(o);
  if (!dir.empty()) {
    if (o.format == "json" || o.format == "both") write_atomically(dir / "report.json", render_json(report));
    if (o.format == "markdown" || o.format == "both") write_atomically(dir / "report.md", render_markdown(report));
  }
  out << "verdict: " << to_string(report.verdict) << "\n";
  for (const auto& outcome : report.ante_hoc.outcomes) {
    out << (outcome.satisfied ? "PASS" : "VIOLATED") << " [" << to_string(outcome.severity) << "] "
        << outcome.message << " observed=" << outcome.observed.dump()
        << (outcome.note.empty() ? "" : " (" + outcome.note + ")") << "\n";
  }
  if (report.ante_hoc.digest_changed) out << "hyperparameters changed since fitting\n";
  for (const auto& [id, attack] : report.attacks) {
    if (const auto* m = std::get_if<MembershipAttackResult>(&attack)) {
      out << id << ": auc=" << shortest_repr(m->summary.auc) << " p_value=" << shortest_repr(m->p_value) << "\n";
    } else {
      for (const auto& a : std::get<std::vector<AttributeRiskResult>>(attack)) {
        out << id << ": " << a.attribute << " arr="
            << (a.arr ? (std::isinf(*a.arr) ? std::string("inf") : shortest_repr(*a.arr)) : std::string("n/a"))
            << (a.leaking ? " LEAKING" : "") << "\n";
      }
    }
  }
  for (const auto& [id, what] : report.attack_errors) out << id << ": error: " << what << "\n";
}

struct FittedTarget {
  Dataset data;
  Split split;
  TrainedModel model;
};

inline FittedTarget fit_target(const Options& o) {
  if (o.data.empty() || o.schema.empty() || o.model_config.empty()) {
    throw AuditError(ErrorCode::Usage, "--data, --schema and --model-config are required to fit a target");
  }
  FittedTarget t;
  t.data = load_dataset(o.data, o.schema);
  t.split = split_dataset(t.data, o.test_fraction, o.seed);
  auto mc = load_model_config(o);
  t.model = fit(mc.hyperparameters, t.data, t.split);
  if (mc.fitted_digest) t.model.fitted_hyperparameter_digest = *mc.fitted_digest;
  return t;
}

inline bool predictions_mode(const Options& o) {
  const bool preds = !o.preds_in.empty() || !o.preds_out.empty();
  if (!preds) return false;
  if (o.preds_in.empty() || o.preds_out.empty()) {
    throw AuditError(ErrorCode::Usage, "--preds-in and --preds-out must be given together");
  }
  if (!o.data.empty() || !o.schema.empty()) {
    throw AuditError(ErrorCode::Usage, "give either saved predictions or --data/--schema, not both");
  }
  return true;
}

inline int finish(const Options& o, const ReleaseOutcome& outcome, std::ostream& out) {
  emit_report(o, outcome.report, out);
  if (!outcome.report.attack_errors.empty()) return kExitOperational;
  return exit_code(outcome.report.verdict);
}

inline int run_check(const Options& o, std::ostream& out) {
  if (o.model_config.empty() || o.risk_appetite.empty()) {
    throw AuditError(ErrorCode::Usage, "check needs --model-config and --risk-appetite");
  }
  const auto ra = load_risk_appetite(o.risk_appetite);
  const auto mc = load_model_config(o);
  ReportDocument report;
  report.metadata = metadata(o);
  report.ante_hoc.model_kind = std::string(to_string(mc.hyperparameters.model_kind));
  report.ante_hoc.outcomes = check_hyperparameters(mc.hyperparameters, ra);
  if (mc.fitted_digest) report.ante_hoc.digest_changed = hyperparameter_digest(mc.hyperparameters) != *mc.fitted_digest;
  report.attack_thresholds = ra.attack_thresholds;
  report.verdict = recompute_verdict(report);
  emit_report(o, report, out);
  return exit_code(report.verdict);
}

inline int run_train(const Options& o, std::ostream& out) {
  if (o.out_dir.empty()) throw AuditError(ErrorCode::Usage, "train needs --out-dir");
  const auto t = fit_target(o);
  const auto dir = output_dir(o);
  const auto preds = target_predictions(t.model, t.data, t.split);
  Matrix in_rows = preds.rows.select_rows(std::vector<std::size_t>(
      [&] { std::vector<std::size_t> v(t.split.train_indices.size()); std::iota(v.begin(), v.end(), 0); return v; }()));
  std::vector<std::size_t> out_positions(t.split.test_indices.size());
  std::iota(out_positions.begin(), out_positions.end(), t.split.train_indices.size());
  Matrix out_rows = preds.rows.select_rows(out_positions);
  write_atomically(dir / "preds_in.csv", format_probability_rows(in_rows));
  write_atomically(dir / "preds_out.csv", format_probability_rows(out_rows));

  auto model_json = to_json(t.model.hyperparameters);
  model_json["fitted_hyperparameter_digest"] = t.model.fitted_hyperparameter_digest;
  model_json["fit_digest"] = t.model.fit_digest;
  write_atomically(dir / "model.json", model_json.dump(2) + "\n");
  nlohmann::json split{{"seed", t.split.seed},
                       {"test_fraction", o.test_fraction},
                       {"train_indices", t.split.train_indices},
                       {"test_indices", t.split.test_indices}};
  write_atomically(dir / "split.json", split.dump(2) + "\n");
  out << "trained " << to_string(t.model.hyperparameters.model_kind) << " on " << t.split.train_indices.size()
      << " records; fit digest " << t.model.fit_digest << "\n";
  return kExitRelease;
}

inline int run_attack(const Options& o, const std::string& which, std::ostream& out) {
  std::optional<RiskAppetite> ra;
  if (predictions_mode(o)) {
    if (which != "worst_case") {
      throw AuditError(ErrorCode::Usage, "attack " + which + " needs --data/--schema/--model-config");
    }
    const auto preds = load_predictions(o.preds_in, o.preds_out);
    if (!o.risk_appetite.empty()) ra = load_risk_appetite(o.risk_appetite);
    std::optional<Hyperparameters> reported;
    if (!o.model_config.empty()) reported = load_model_config(o).hyperparameters;
    return finish(o, request_release_from_predictions(preds, reported, ra, attack_suite(o, {which}), metadata(o)), out);
  }
  const auto t = fit_target(o);
  if (!o.risk_appetite.empty()) ra = load_risk_appetite(o.risk_appetite);
  auto outcome = request_release(t.model, t.data, t.split, ra.value_or(RiskAppetite{}), attack_suite(o, {which}),
                                 metadata(o));
  if (!ra) {
    outcome.report.attack_thresholds.reset();
    outcome.report.verdict = recompute_verdict(outcome.report);
  }
  return finish(o, outcome, out);
}

inline int run_release(const Options& o, std::ostream& out) {
  if (o.risk_appetite.empty()) throw AuditError(ErrorCode::Usage, "release needs --risk-appetite");
  if (predictions_mode(o)) {
    const auto preds = load_predictions(o.preds_in, o.preds_out);
    const auto ra = load_risk_appetite(o.risk_appetite);
    std::optional<Hyperparameters> reported;
    if (!o.model_config.empty()) reported = load_model_config(o).hyperparameters;
    return finish(o, request_release_from_predictions(preds, reported, ra, attack_suite(o, {"worst_case"}), metadata(o)),
                  out);
  }
  const auto t = fit_target(o);
  const auto ra = load_risk_appetite(o.risk_appetite);
  return finish(o,
                request_release(t.model, t.data, t.split, ra, attack_suite(o, {"attribute", "lira", "worst_case"}),
                                metadata(o)),
                out);
}

inline void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data, "Dataset CSV (header row required)");
  cmd->add_option("--schema", o.schema, "Feature schema JSON");
  cmd->add_option("--preds-in", o.preds_in, "Saved predictions for training members (headerless CSV)");
  cmd->add_option("--preds-out", o.preds_out, "Saved predictions for non-members (headerless CSV)");
  cmd->add_option("--risk-appetite", o.risk_appetite, "TRE risk-appetite JSON");
  cmd->add_option("--model-config", o.model_config, "Model hyperparameter JSON");
  cmd->add_option("--attack-config", o.attack_config, "Attack configuration JSON");
  cmd->add_option("--out-dir", o.out_dir, "Directory for report.json / report.md");
  cmd->add_option("--seed", o.seed, "Master seed for splitting and attacks");
  cmd->add_option("--timestamp", o.timestamp, "Pin the report timestamp");
  cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "markdown", "both"}));
  cmd->add_option("--test-fraction", o.test_fraction, "Held-out fraction of the stratified split")
      ->check(CLI::Range(0.0, 1.0));
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Disclosure-risk audit for trained classifiers"};
  app.require_subcommand(1);
  Options o;
  auto* check = app.add_subcommand("check", "Ante-hoc hyperparameter checks only");
  auto* train = app.add_subcommand("train", "Fit a target model and save its predictions and digest");
  auto* attack = app.add_subcommand("attack", "Run one post-hoc attack");
  auto* release = app.add_subcommand("release", "Full release check: rules, change detection and attacks");
  attack->require_subcommand(1);
  auto* worst = attack->add_subcommand("worst-case", "Worst-case membership inference");
  auto* lira = attack->add_subcommand("lira", "LiRA membership inference");
  auto* attribute = attack->add_subcommand("attribute", "Worst-case attribute inference");
  for (auto* cmd : {check, train, worst, lira, attribute, release}) detail::add_common(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitRelease;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitOperational;
  }

  try {
    if (check->parsed()) return detail::run_check(o, out);
    if (train->parsed()) return detail::run_train(o, out);
    if (release->parsed()) return detail::run_release(o, out);
    if (worst->parsed()) return detail::run_attack(o, "worst_case", out);
    if (lira->parsed()) return detail::run_attack(o, "lira", out);
    if (attribute->parsed()) return detail::run_attack(o, "attribute", out);
  } catch (const AuditError& e) {
    err << "error: " << e.what() << "\n";
    return kExitOperational;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON input: " << e.what() << "\n";
    return kExitOperational;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOperational;
  }
  err << "error: no command given\n";
  return kExitOperational;
}

}  // namespace sdcaudit::cli
