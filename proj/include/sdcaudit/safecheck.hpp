#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdcaudit/csv.hpp"
#include "sdcaudit/error.hpp"
#include "sdcaudit/hyperparameters.hpp"
#include "sdcaudit/models.hpp"

namespace sdcaudit {

enum class Severity { warn, fail };

inline std::string_view to_string(Severity s) { return s == Severity::warn ? "warn" : "fail"; }

enum class Op { lt, le, gt, ge, eq, ne, in, not_in };

inline std::string_view to_string(Op op) {
  switch (op) {
    case Op::lt: return "<";
    case Op::le: return "<=";
    case Op::gt: return ">";
    case Op::ge: return ">=";
    case Op::eq: return "==";
    case Op::ne: return "!=";
    case Op::in: return "in";
    case Op::not_in: return "not_in";
  }
  return "?";
}

inline std::optional<Op> parse_op(std::string_view text) {
  static const std::map<std::string, Op, std::less<>> ops{
      {"<", Op::lt},  {"<=", Op::le}, {"≤", Op::le}, {">", Op::gt},     {">=", Op::ge},
      {"≥", Op::ge}, {"=", Op::eq},  {"==", Op::eq}, {"!=", Op::ne},     {"≠", Op::ne},
      {"in", Op::in}, {"not_in", Op::not_in}, {"not-in", Op::not_in},
  };
  auto it = ops.find(text);
  if (it == ops.end()) return std::nullopt;
  return it->second;
}

struct Rule;

struct Comparator {
  std::string param;
  Op op = Op::eq;
  nlohmann::json value;  // scalar, or array of scalars for in / not_in
};

struct AllOf {
  std::vector<Rule> rules;
};

struct AnyOf {
  std::vector<Rule> rules;
};

struct Rule {
  std::variant<Comparator, AllOf, AnyOf> kind;
  Severity severity = Severity::fail;
  std::string message;
};

struct AttackThresholds {
  double max_mia_auc = 1.0;
  double max_arr = 1.0;
  double min_pvalue = 0.05;

  friend bool operator==(const AttackThresholds&, const AttackThresholds&) = default;
};

/// TRE-authored rules per model kind plus attack-metric ceilings.
struct RiskAppetite {
  std::map<std::string, std::vector<Rule>> rules;
  AttackThresholds attack_thresholds;
};

struct RuleOutcome {
  std::string message;
  Severity severity = Severity::fail;
  bool satisfied = false;
  nlohmann::json observed;  // parameter values as found; null when absent
  std::string note;         // e.g. "parameter absent"

  friend bool operator==(const RuleOutcome&, const RuleOutcome&) = default;
};

namespace detail {

[[noreturn]] inline void violation(const std::string& pointer, const std::string& what) {
  throw AuditError(ErrorCode::SchemaViolation, pointer + ": " + what);
}

inline bool is_scalar(const nlohmann::json& j) { return j.is_number() || j.is_string() || j.is_boolean(); }

inline Rule parse_rule(const nlohmann::json& j, const std::string& at, bool top_level) {
  if (!j.is_object()) violation(at, "rule must be an object");
  Rule rule;
  const bool has_all = j.contains("all_of");
  const bool has_any = j.contains("any_of");
  const bool has_param = j.contains("param");
  if (has_all + has_any + has_param != 1) violation(at, "rule needs exactly one of param / all_of / any_of");

  if (has_param) {
    Comparator c;
    if (!j["param"].is_string() || j["param"].get<std::string>().empty()) violation(at + "/param", "must be a non-empty string");
    c.param = j["param"].get<std::string>();
    if (!j.contains("op") || !j["op"].is_string()) violation(at + "/op", "must be a string");
    auto op = parse_op(j["op"].get<std::string>());
    if (!op) violation(at + "/op", "unknown operator '" + j["op"].get<std::string>() + "'");
    c.op = *op;
    if (!j.contains("value")) violation(at + "/value", "missing");
    c.value = j["value"];
    if (c.op == Op::in || c.op == Op::not_in) {
      if (!c.value.is_array() || c.value.empty()) violation(at + "/value", "must be a non-empty array for in / not_in");
      for (const auto& v : c.value) {
        if (!is_scalar(v)) violation(at + "/value", "array entries must be scalars");
      }
    } else if (!is_scalar(c.value)) {
      violation(at + "/value", "must be a scalar");
    } else if ((c.op != Op::eq && c.op != Op::ne) && !c.value.is_number()) {
      violation(at + "/value", "ordering operators need a numeric value");
    }
    rule.kind = std::move(c);
  } else {
    const std::string key = has_all ? "all_of" : "any_of";
    const auto& members = j[key];
    if (!members.is_array() || members.empty()) violation(at + "/" + key, "must be a non-empty array");
    std::vector<Rule> children;
    for (std::size_t i = 0; i < members.size(); ++i) {
      children.push_back(parse_rule(members[i], at + "/" + key + "/" + std::to_string(i), false));
    }
    if (has_all) {
      rule.kind = AllOf{std::move(children)};
    } else {
      rule.kind = AnyOf{std::move(children)};
    }
  }

  if (j.contains("severity")) {
    if (!j["severity"].is_string()) violation(at + "/severity", "must be \"warn\" or \"fail\"");
    const auto s = j["severity"].get<std::string>();
    if (s == "warn") {
      rule.severity = Severity::warn;
    } else if (s == "fail") {
      rule.severity = Severity::fail;
    } else {
      violation(at + "/severity", "must be \"warn\" or \"fail\"");
    }
  } else if (top_level) {
    violation(at + "/severity", "missing");
  }
  if (j.contains("message")) {
    if (!j["message"].is_string()) violation(at + "/message", "must be a string");
    rule.message = j["message"].get<std::string>();
  }
  return rule;
}

inline double threshold(const nlohmann::json& t, const std::string& name) {
  if (!t.contains(name) || !t[name].is_number()) violation("/attack_thresholds/" + name, "must be a number");
  return t[name].get<double>();
}

}  // namespace detail

inline RiskAppetite risk_appetite_from_json(const nlohmann::json& j) {
  using detail::violation;
  if (!j.is_object()) violation("", "risk appetite must be a JSON object");
  RiskAppetite ra;
  if (!j.contains("models") || !j["models"].is_object()) violation("/models", "must be an object");
  for (const auto& [kind, rules] : j["models"].items()) {
    const std::string at = "/models/" + kind;
    if (!rules.is_array()) violation(at, "must be an array of rules");
    auto& list = ra.rules[kind];
    for (std::size_t i = 0; i < rules.size(); ++i) {
      list.push_back(detail::parse_rule(rules[i], at + "/" + std::to_string(i), true));
    }
  }
  if (!j.contains("attack_thresholds") || !j["attack_thresholds"].is_object()) {
    violation("/attack_thresholds", "must be an object");
  }
  const auto& t = j["attack_thresholds"];
  ra.attack_thresholds.max_mia_auc = detail::threshold(t, "max_mia_auc");
  ra.attack_thresholds.max_arr = detail::threshold(t, "max_arr");
  ra.attack_thresholds.min_pvalue = detail::threshold(t, "min_pvalue");
  const auto& th = ra.attack_thresholds;
  if (!(th.max_mia_auc >= 0.5 && th.max_mia_auc <= 1.0)) violation("/attack_thresholds/max_mia_auc", "must lie in [0.5, 1]");
  if (!(th.max_arr >= 1.0)) violation("/attack_thresholds/max_arr", "must be >= 1");
  if (!(th.min_pvalue > 0.0 && th.min_pvalue < 1.0)) violation("/attack_thresholds/min_pvalue", "must lie in (0, 1)");
  return ra;
}

/// Reads the appetite file (opened read-only, never written).
inline RiskAppetite load_risk_appetite(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw AuditError(ErrorCode::SchemaViolation, "'" + path + "' is not valid JSON: " + e.what());
  }
  return risk_appetite_from_json(j);
}

namespace detail {

struct Evaluation {
  bool satisfied = false;
  std::string note;
};

inline bool scalar_equal(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number() && b.is_number()) return a.get<double>() == b.get<double>();
  return a == b;
}

inline Evaluation evaluate(const Comparator& c, const Hyperparameters& h, nlohmann::json& observed) {
  auto it = h.entries.find(c.param);
  if (it == h.entries.end()) {
    observed[c.param] = nullptr;
    return {false, "parameter absent"};
  }
  const nlohmann::json value = scalar_to_json(it->second);
  observed[c.param] = value;
  switch (c.op) {
    case Op::eq: return {scalar_equal(value, c.value), {}};
    case Op::ne: return {!scalar_equal(value, c.value), {}};
    case Op::in:
    case Op::not_in: {
      bool found = false;
      for (const auto& v : c.value) found = found || scalar_equal(value, v);
      return {c.op == Op::in ? found : !found, {}};
    }
    default: break;
  }
  if (!value.is_number()) return {false, "type mismatch: '" + c.param + "' is not numeric"};
  const double x = value.get<double>();
  const double y = c.value.get<double>();
  switch (c.op) {
    case Op::lt: return {x < y, {}};
    case Op::le: return {x <= y, {}};
    case Op::gt: return {x > y, {}};
    case Op::ge: return {x >= y, {}};
    default: return {false, {}};
  }
}

inline Evaluation evaluate(const Rule& rule, const Hyperparameters& h, nlohmann::json& observed) {
  return std::visit(
      [&](const auto& k) -> Evaluation {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Comparator>) {
          return evaluate(k, h, observed);
        } else {
          constexpr bool all = std::is_same_v<K, AllOf>;
          Evaluation out{all, {}};
          for (const auto& child : k.rules) {
            auto e = evaluate(child, h, observed);
            if (!e.note.empty() && out.note.empty()) out.note = e.note;
            out.satisfied = all ? (out.satisfied && e.satisfied) : (out.satisfied || e.satisfied);
          }
          if (out.satisfied) out.note.clear();
          return out;
        }
      },
      rule.kind);
}

inline std::string describe(const Rule& rule) {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Comparator>) {
          return k.param + " " + std::string(to_string(k.op)) + " " + k.value.dump();
        } else {
          std::string out = std::is_same_v<K, AllOf> ? "all_of(" : "any_of(";
          for (std::size_t i = 0; i < k.rules.size(); ++i) out += (i ? ", " : "") + describe(k.rules[i]);
          return out + ")";
        }
      },
      rule.kind);
}

}  // namespace detail

/// One outcome per top-level rule registered for h.model_kind.
inline std::vector<RuleOutcome> check_hyperparameters(const Hyperparameters& h, const RiskAppetite& ra) {
  std::vector<RuleOutcome> outcomes;
  auto it = ra.rules.find(std::string(to_string(h.model_kind)));
  if (it == ra.rules.end()) return outcomes;
  for (const auto& rule : it->second) {
    RuleOutcome o;
    o.message = rule.message.empty() ? detail::describe(rule) : rule.message;
    o.severity = rule.severity;
    o.observed = nlohmann::json::object();
    auto e = detail::evaluate(rule, h, o.observed);
    o.satisfied = e.satisfied;
    o.note = e.note;
    outcomes.push_back(std::move(o));
  }
  return outcomes;
}

/// True iff `current` no longer matches the hyperparameters the model was fitted with.
inline bool detect_unretrained_change(const TrainedModel& m, const Hyperparameters& current) {
  if (m.fitted_hyperparameter_digest.empty()) {
    throw AuditError(ErrorCode::MissingDigest, "model carries no fit-time hyperparameter digest");
  }
  return hyperparameter_digest(current) != m.fitted_hyperparameter_digest;
}

enum class Verdict { recommend_release, recommend_review, recommend_reject };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::recommend_release: return "recommend_release";
    case Verdict::recommend_review: return "recommend_review";
    case Verdict::recommend_reject: return "recommend_reject";
  }
  return "?";
}

inline std::optional<Verdict> verdict_from_string(std::string_view s) {
  if (s == "recommend_release") return Verdict::recommend_release;
  if (s == "recommend_review") return Verdict::recommend_review;
  if (s == "recommend_reject") return Verdict::recommend_reject;
  return std::nullopt;
}

/// Attack numbers the decision table looks at.
struct AttackEvidence {
  std::vector<std::pair<double, double>> membership;  // (auc, p_value)
  std::vector<std::optional<double>> arr;
  bool errors = false;
};

/// Decision table:
///   reject  - an unsatisfied fail rule, a membership AUC above max_mia_auc,
///             or an ARR above max_arr;
///   review  - otherwise, an unsatisfied warn rule, an unretrained change, a
///             membership attack with p_value below min_pvalue, an attack
///             error, or no thresholds to judge against;
///   release - otherwise.
inline Verdict decide_verdict(const std::vector<RuleOutcome>& outcomes, bool digest_changed,
                              const AttackEvidence& evidence, const std::optional<AttackThresholds>& thresholds) {
  bool reject = false;
  bool review = digest_changed || evidence.errors || !thresholds.has_value();
  for (const auto& o : outcomes) {
    if (o.satisfied) continue;
    (o.severity == Severity::fail ? reject : review) = true;
  }
  if (thresholds) {
    for (const auto& [auc, p] : evidence.membership) {
      if (auc > thresholds->max_mia_auc) reject = true;
      if (p < thresholds->min_pvalue) review = true;
    }
    for (const auto& arr : evidence.arr) {
      if (arr && *arr > thresholds->max_arr) reject = true;
    }
  }
  if (reject) return Verdict::recommend_reject;
  if (review) return Verdict::recommend_review;
  return Verdict::recommend_release;
}

}  // namespace sdcaudit
