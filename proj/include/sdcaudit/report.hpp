#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdcaudit/attack_attribute.hpp"
#include "sdcaudit/attack_membership.hpp"
#include "sdcaudit/error.hpp"
#include "sdcaudit/safecheck.hpp"

namespace sdcaudit {

inline constexpr std::string_view kToolName = "sdcaudit";
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kReportSchemaVersion = "1";
inline constexpr std::size_t kTopRiskLimit = 20;

struct ReportMetadata {
  std::string tool = std::string(kToolName);
  std::string tool_version = std::string(kToolVersion);
  std::string schema_version = std::string(kReportSchemaVersion);
  std::uint64_t seed = 0;
  std::string timestamp;
  std::map<std::string, std::string> input_digests;  // role -> sha256 of file bytes
};

struct AnteHocFindings {
  std::string model_kind;
  std::vector<RuleOutcome> outcomes;
  bool digest_changed = false;
};

struct TopRiskRecord {
  std::size_t record = 0;
  double score = 0.0;
  std::string attack;
};

using AttackReport = std::variant<MembershipAttackResult, std::vector<AttributeRiskResult>>;

/// The release dossier. Attack ids double as map keys, so attacks are always
/// listed in a fixed (lexicographic) order.
struct ReportDocument {
  ReportMetadata metadata;
  AnteHocFindings ante_hoc;
  std::optional<AttackThresholds> attack_thresholds;
  std::vector<std::string> attacks_run;
  std::map<std::string, AttackReport> attacks;
  std::map<std::string, std::string> attack_errors;
  Verdict verdict = Verdict::recommend_review;
  std::vector<TopRiskRecord> top_risk_records;
};

/// Highest held-out membership scores across all membership attacks.
inline std::vector<TopRiskRecord> top_risk_records(const std::map<std::string, AttackReport>& attacks,
                                                   std::size_t limit = kTopRiskLimit) {
  std::vector<TopRiskRecord> all;
  for (const auto& [id, report] : attacks) {
    if (const auto* m = std::get_if<MembershipAttackResult>(&report)) {
      for (const auto& r : m->per_record) {
        if (r.evaluated) all.push_back({r.record, r.score, id});
      }
    }
  }
  std::sort(all.begin(), all.end(), [](const TopRiskRecord& a, const TopRiskRecord& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.attack != b.attack) return a.attack < b.attack;
    return a.record < b.record;
  });
  if (all.size() > limit) all.resize(limit);
  return all;
}

inline AttackEvidence evidence_from(const ReportDocument& r) {
  AttackEvidence e;
  for (const auto& [id, report] : r.attacks) {
    if (const auto* m = std::get_if<MembershipAttackResult>(&report)) {
      e.membership.emplace_back(m->summary.auc, m->p_value);
    } else {
      for (const auto& a : std::get<std::vector<AttributeRiskResult>>(report)) e.arr.push_back(a.arr);
    }
  }
  e.errors = !r.attack_errors.empty();
  return e;
}

/// Recomputes the verdict from the document's own contents.
inline Verdict recompute_verdict(const ReportDocument& r) {
  return decide_verdict(r.ante_hoc.outcomes, r.ante_hoc.digest_changed, evidence_from(r), r.attack_thresholds);
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_or_inf(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw AuditError(ErrorCode::SchemaViolation, "unexpected numeric string '" + s + "'");
  }
  return j.get<double>();
}

inline nlohmann::json to_json(const MembershipAttackResult& m) {
  nlohmann::json tpr = nlohmann::json::array();
  for (const auto& [q, t] : m.summary.tpr_at_fpr) tpr.push_back({{"fpr", q}, {"tpr", t}});
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : m.per_record) {
    records.push_back({{"record", r.record}, {"score", r.score}, {"member", r.member}, {"evaluated", r.evaluated}});
  }
  return {{"type", "membership"},
          {"auc", m.summary.auc},
          {"advantage", m.summary.advantage},
          {"tpr_at_fpr", tpr},
          {"p_value", m.p_value},
          {"per_repetition_auc", m.per_repetition_auc},
          {"baseline_auc", m.baseline_auc},
          {"per_record", records}};
}

inline MembershipAttackResult membership_from_json(const nlohmann::json& j) {
  MembershipAttackResult m;
  m.summary.auc = j.at("auc").get<double>();
  m.summary.advantage = j.at("advantage").get<double>();
  for (const auto& t : j.at("tpr_at_fpr")) m.summary.tpr_at_fpr[t.at("fpr").get<double>()] = t.at("tpr").get<double>();
  m.p_value = j.at("p_value").get<double>();
  m.per_repetition_auc = j.at("per_repetition_auc").get<std::vector<double>>();
  m.baseline_auc = j.at("baseline_auc").get<std::vector<double>>();
  for (const auto& r : j.at("per_record")) {
    m.per_record.push_back({r.at("record").get<std::size_t>(), r.at("score").get<double>(),
                            r.at("member").get<bool>(), r.at("evaluated").get<bool>()});
  }
  return m;
}

inline nlohmann::json to_json(const AttributeRiskResult& a) {
  return {{"attribute", a.attribute},
          {"fraction_train", a.fraction_train},
          {"fraction_test", a.fraction_test},
          {"arr", a.arr ? number_or_inf(*a.arr) : nlohmann::json("not_applicable")},
          {"leaking", a.leaking},
          {"n_train", a.n_train},
          {"n_test", a.n_test},
          {"vulnerable_train", a.vulnerable_train},
          {"vulnerable_test", a.vulnerable_test},
          {"predicted_incorrect_train", a.predicted_incorrect_train},
          {"predicted_incorrect_test", a.predicted_incorrect_test}};
}

inline AttributeRiskResult attribute_from_json(const nlohmann::json& j) {
  AttributeRiskResult a;
  a.attribute = j.at("attribute").get<std::string>();
  a.fraction_train = j.at("fraction_train").get<double>();
  a.fraction_test = j.at("fraction_test").get<double>();
  const auto& arr = j.at("arr");
  if (!(arr.is_string() && arr.get<std::string>() == "not_applicable")) a.arr = number_or_inf(arr);
  a.leaking = j.at("leaking").get<bool>();
  a.n_train = j.at("n_train").get<std::size_t>();
  a.n_test = j.at("n_test").get<std::size_t>();
  a.vulnerable_train = j.at("vulnerable_train").get<std::size_t>();
  a.vulnerable_test = j.at("vulnerable_test").get<std::size_t>();
  a.predicted_incorrect_train = j.at("predicted_incorrect_train").get<std::size_t>();
  a.predicted_incorrect_test = j.at("predicted_incorrect_test").get<std::size_t>();
  return a;
}

}  // namespace detail

inline nlohmann::json to_json(const ReportDocument& r) {
  nlohmann::json outcomes = nlohmann::json::array();
  for (const auto& o : r.ante_hoc.outcomes) {
    outcomes.push_back({{"message", o.message},
                        {"severity", to_string(o.severity)},
                        {"satisfied", o.satisfied},
                        {"observed", o.observed},
                        {"note", o.note}});
  }
  nlohmann::json attacks = nlohmann::json::object();
  for (const auto& [id, report] : r.attacks) {
    if (const auto* m = std::get_if<MembershipAttackResult>(&report)) {
      attacks[id] = detail::to_json(*m);
    } else {
      nlohmann::json list = nlohmann::json::array();
      for (const auto& a : std::get<std::vector<AttributeRiskResult>>(report)) list.push_back(detail::to_json(a));
      attacks[id] = {{"type", "attribute"}, {"attributes", list}};
    }
  }
  nlohmann::json top = nlohmann::json::array();
  for (const auto& t : r.top_risk_records) top.push_back({{"record", t.record}, {"score", t.score}, {"attack", t.attack}});
  nlohmann::json thresholds = nullptr;
  if (r.attack_thresholds) {
    thresholds = {{"max_mia_auc", r.attack_thresholds->max_mia_auc},
                  {"max_arr", r.attack_thresholds->max_arr},
                  {"min_pvalue", r.attack_thresholds->min_pvalue}};
  }
  return {{"metadata",
           {{"tool", r.metadata.tool},
            {"tool_version", r.metadata.tool_version},
            {"schema_version", r.metadata.schema_version},
            {"seed", r.metadata.seed},
            {"timestamp", r.metadata.timestamp},
            {"input_digests", r.metadata.input_digests}}},
          {"ante_hoc",
           {{"model_kind", r.ante_hoc.model_kind},
            {"outcomes", outcomes},
            {"digest_changed", r.ante_hoc.digest_changed}}},
          {"attack_thresholds", thresholds},
          {"attacks_run", r.attacks_run},
          {"attacks", attacks},
          {"attack_errors", r.attack_errors},
          {"verdict", to_string(r.verdict)},
          {"top_risk_records", top}};
}

inline ReportDocument report_from_json(const nlohmann::json& j) {
  try {
    ReportDocument r;
    const auto& meta = j.at("metadata");
    r.metadata.tool = meta.at("tool").get<std::string>();
    r.metadata.tool_version = meta.at("tool_version").get<std::string>();
    r.metadata.schema_version = meta.at("schema_version").get<std::string>();
    r.metadata.seed = meta.at("seed").get<std::uint64_t>();
    r.metadata.timestamp = meta.at("timestamp").get<std::string>();
    r.metadata.input_digests = meta.at("input_digests").get<std::map<std::string, std::string>>();

    const auto& ante = j.at("ante_hoc");
    r.ante_hoc.model_kind = ante.at("model_kind").get<std::string>();
    r.ante_hoc.digest_changed = ante.at("digest_changed").get<bool>();
    for (const auto& o : ante.at("outcomes")) {
      RuleOutcome out;
      out.message = o.at("message").get<std::string>();
      out.severity = o.at("severity").get<std::string>() == "warn" ? Severity::warn : Severity::fail;
      out.satisfied = o.at("satisfied").get<bool>();
      out.observed = o.at("observed");
      out.note = o.at("note").get<std::string>();
      r.ante_hoc.outcomes.push_back(std::move(out));
    }
    const auto& t = j.at("attack_thresholds");
    if (!t.is_null()) {
      r.attack_thresholds = AttackThresholds{t.at("max_mia_auc").get<double>(), t.at("max_arr").get<double>(),
                                             t.at("min_pvalue").get<double>()};
    }
    r.attacks_run = j.at("attacks_run").get<std::vector<std::string>>();
    for (const auto& [id, a] : j.at("attacks").items()) {
      if (a.at("type").get<std::string>() == "membership") {
        r.attacks[id] = detail::membership_from_json(a);
      } else {
        std::vector<AttributeRiskResult> list;
        for (const auto& item : a.at("attributes")) list.push_back(detail::attribute_from_json(item));
        r.attacks[id] = std::move(list);
      }
    }
    r.attack_errors = j.at("attack_errors").get<std::map<std::string, std::string>>();
    auto verdict = verdict_from_string(j.at("verdict").get<std::string>());
    if (!verdict) throw AuditError(ErrorCode::SchemaViolation, "/verdict: unknown value");
    r.verdict = *verdict;
    if (recompute_verdict(r) != r.verdict) {
      throw AuditError(ErrorCode::SchemaViolation, "/verdict: does not follow from the report contents");
    }
    for (const auto& item : j.at("top_risk_records")) {
      r.top_risk_records.push_back(
          {item.at("record").get<std::size_t>(), item.at("score").get<double>(), item.at("attack").get<std::string>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw AuditError(ErrorCode::SchemaViolation, std::string("malformed report: ") + e.what());
  }
}

/// Canonical form: keys sorted, two-space indent, shortest round-trip numbers,
/// trailing newline.
inline std::string render_json(const ReportDocument& r) { return to_json(r).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Markdown

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, v);
  return buffer;
}

inline std::string pretty_attack_name(const std::string& id) {
  if (id == "worst_case") return "Worst-case membership inference";
  if (id == "lira") return "LiRA membership inference";
  if (id == "attribute") return "Worst-case attribute inference";
  return id;
}

inline std::string md_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline std::string render_markdown(const ReportDocument& r) {
  using detail::fixed;
  std::string md;
  md += "# Model release report\n\n";
  md += "- Tool: " + r.metadata.tool + " " + r.metadata.tool_version + " (report schema " +
        r.metadata.schema_version + ")\n";
  md += "- Seed: " + std::to_string(r.metadata.seed) + "\n";
  md += "- Timestamp: " + r.metadata.timestamp + "\n\n";

  md += "## Verdict\n\n";
  std::string verdict(to_string(r.verdict));
  std::transform(verdict.begin(), verdict.end(), verdict.begin(), [](unsigned char c) { return std::toupper(c); });
  md += "**" + verdict + "**\n\n";
  if (r.attack_thresholds) {
    md += "Thresholds: max membership AUC " + fixed(r.attack_thresholds->max_mia_auc) + ", max ARR " +
          fixed(r.attack_thresholds->max_arr) + ", min p-value " + fixed(r.attack_thresholds->min_pvalue) + ".\n\n";
  } else {
    md += "No risk appetite was supplied; attack results need manual review.\n\n";
  }

  md += "## Ante-hoc findings\n\n";
  md += "- Model kind: " + (r.ante_hoc.model_kind.empty() ? std::string("unknown") : r.ante_hoc.model_kind) + "\n";
  md += std::string("- Hyperparameters changed since fitting: ") + (r.ante_hoc.digest_changed ? "YES" : "no") + "\n\n";
  if (r.ante_hoc.outcomes.empty()) {
    md += "No rules apply to this model kind.\n\n";
  } else {
    md += "| Result | Severity | Rule | Observed | Note |\n|---|---|---|---|---|\n";
    for (const auto& o : r.ante_hoc.outcomes) {
      md += std::string("| ") + (o.satisfied ? "PASS" : "VIOLATED") + " | " + std::string(to_string(o.severity)) +
            " | " + detail::md_escape(o.message) + " | " + detail::md_escape(o.observed.dump()) + " | " +
            detail::md_escape(o.note) + " |\n";
    }
    md += "\n";
  }

  md += "## Membership attacks\n\n";
  bool any_membership = false;
  for (const auto& [id, report] : r.attacks) {
    const auto* m = std::get_if<MembershipAttackResult>(&report);
    if (!m) continue;
    any_membership = true;
    md += "### " + detail::pretty_attack_name(id) + " (`" + id + "`)\n\n";
    md += "- AUC: " + fixed(m->summary.auc) + "\n";
    md += "- Membership advantage: " + fixed(m->summary.advantage) + "\n";
    md += "- p-value vs shuffled-label baseline: " + fixed(m->p_value) + "\n";
    if (!m->per_repetition_auc.empty()) {
      const double worst = *std::max_element(m->per_repetition_auc.begin(), m->per_repetition_auc.end());
      md += "- Highest single-repetition AUC: " + fixed(worst) + "\n";
    }
    md += "\n| FPR | TPR |\n|---|---|\n";
    for (const auto& [q, t] : m->summary.tpr_at_fpr) md += "| " + fixed(q) + " | " + fixed(t) + " |\n";
    md += "\n";
  }
  if (!any_membership) md += "Membership attacks: not run.\n\n";

  md += "## Attribute risk\n\n";
  bool any_attribute = false;
  for (const auto& [id, report] : r.attacks) {
    const auto* list = std::get_if<std::vector<AttributeRiskResult>>(&report);
    if (!list) continue;
    any_attribute = true;
    md += "| Attribute | Train fraction | Test fraction | ARR | Status |\n|---|---|---|---|---|\n";
    for (const auto& a : *list) {
      md += "| " + detail::md_escape(a.attribute) + " | " + fixed(a.fraction_train) + " | " + fixed(a.fraction_test) +
            " | " + (a.arr ? fixed(*a.arr) : std::string("n/a")) + " | " +
            (a.leaking ? "LEAKING (ARR>1)" : "ok") + " |\n";
    }
    md += "\n";
  }
  if (!any_attribute) md += "Attribute attack: not run.\n\n";

  if (!r.attack_errors.empty()) {
    md += "## Attack errors\n\n";
    for (const auto& [id, what] : r.attack_errors) md += "- `" + id + "`: " + detail::md_escape(what) + "\n";
    md += "\n";
  }

  md += "## Top-risk records\n\n";
  if (r.top_risk_records.empty()) {
    md += "None.\n\n";
  } else {
    md += "| Record | Score | Attack |\n|---|---|---|\n";
    for (const auto& t : r.top_risk_records) {
      md += "| " + std::to_string(t.record) + " | " + fixed(t.score) + " | " + t.attack + " |\n";
    }
    md += "\n";
  }

  md += "## Caveats\n\n";
  md += "- Worst-case attacks are given the true train/test split and the target's outputs; they bound what a "
        "realistic attacker could achieve rather than estimate it.\n";
  md += "- An attribute is reported as leaking only when its ARR exceeds 1, i.e. the attack succeeds more often "
        "on training records than on unseen ones.\n";
  md += "- Significance is measured against a small shuffled-label baseline; p-values are coarse.\n";
  return md;
}

}  // namespace sdcaudit
