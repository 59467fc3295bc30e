#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"

using namespace sdcaudit;
using nlohmann::json;

namespace {

const char* kThresholds = R"("attack_thresholds": {"max_mia_auc": 0.6, "max_arr": 1.2, "min_pvalue": 0.05})";

RiskAppetite appetite_with(const std::string& kind, const std::string& rules) {
  return fixtures::appetite(R"({"models": {")" + kind + R"(": )" + rules + "}, " + kThresholds + "}");
}

std::string violation_of(const std::string& text) {
  try {
    risk_appetite_from_json(json::parse(text));
  } catch (const AuditError& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    return e.what();
  }
  ADD_FAILURE() << "accepted: " << text;
  return {};
}

Hyperparameters external(std::initializer_list<std::pair<const std::string, Scalar>> entries) {
  Hyperparameters h;
  h.model_kind = ModelKind::external;
  h.entries = entries;
  return h;
}

int rank(Verdict v) { return static_cast<int>(v); }

// Independent evaluator working straight from the rule JSON.
bool brute_eval(const json& rule, const std::map<std::string, double>& values) {
  if (rule.contains("all_of")) {
    bool all = true;
    for (const auto& r : rule["all_of"]) all = all && brute_eval(r, values);
    return all;
  }
  if (rule.contains("any_of")) {
    bool any = false;
    for (const auto& r : rule["any_of"]) any = any || brute_eval(r, values);
    return any;
  }
  const auto it = values.find(rule["param"].get<std::string>());
  if (it == values.end()) return false;
  const double x = it->second;
  const std::string op = rule["op"];
  if (op == "in" || op == "not_in") {
    bool found = false;
    for (const auto& v : rule["value"]) found = found || v.get<double>() == x;
    return op == "in" ? found : !found;
  }
  const double y = rule["value"].get<double>();
  if (op == "<") return x < y;
  if (op == "<=") return x <= y;
  if (op == ">") return x > y;
  if (op == ">=") return x >= y;
  if (op == "==") return x == y;
  return x != y;
}

json random_rule(Rng& rng, int depth) {
  static const char* ops[] = {"<", "<=", ">", ">=", "==", "!=", "in", "not_in"};
  static const char* params[] = {"a", "b", "c", "d"};  // "d" is never set
  if (depth == 0 || rng.uniform_index(3) == 0) {
    const std::string op = ops[rng.uniform_index(8)];
    json r = {{"param", params[rng.uniform_index(4)]}, {"op", op}};
    if (op == "in" || op == "not_in") {
      json values = json::array();
      for (std::size_t k = 0, n = 1 + rng.uniform_index(3); k < n; ++k) values.push_back(rng.uniform_index(5));
      r["value"] = values;
    } else {
      r["value"] = rng.uniform_index(5);
    }
    return r;
  }
  json children = json::array();
  for (std::size_t k = 0, n = 1 + rng.uniform_index(3); k < n; ++k) children.push_back(random_rule(rng, depth - 1));
  return {{rng.uniform_index(2) ? "all_of" : "any_of", children}};
}

}  // namespace

TEST(RiskAppetiteFile, LoadsTheLeafRule) {
  const auto path = std::filesystem::temp_directory_path() / "sdcaudit_appetite_test.json";
  std::ofstream(path) << R"({"models": {"decision_tree": [
      {"param": "min_samples_leaf", "op": "≥", "value": 5, "severity": "fail", "message": "leaf >= 5"}]},
    "attack_thresholds": {"max_mia_auc": 0.6, "max_arr": 1.2, "min_pvalue": 0.05}})";
  const auto ra = load_risk_appetite(path.string());
  std::filesystem::remove(path);
  ASSERT_EQ(ra.rules.at("decision_tree").size(), 1u);
  const auto& c = std::get<Comparator>(ra.rules.at("decision_tree")[0].kind);
  EXPECT_EQ(c.param, "min_samples_leaf");
  EXPECT_EQ(c.op, Op::ge);
  EXPECT_EQ(c.value, 5);
  EXPECT_EQ(ra.rules.at("decision_tree")[0].severity, Severity::fail);
  EXPECT_EQ(ra.attack_thresholds.max_mia_auc, 0.6);
}

TEST(RiskAppetiteFile, UnknownOperatorReportsItsLocation) {
  const auto what = violation_of(R"({"models": {"decision_tree": [
      {"param": "min_samples_leaf", "op": "≥=", "value": 5, "severity": "fail"}]}, )" + std::string(kThresholds) + "}");
  EXPECT_NE(what.find("/models/decision_tree/0/op"), std::string::npos) << what;
}

TEST(RiskAppetiteFile, EmptyRuleListAlwaysPasses) {
  const auto ra = appetite_with("decision_tree", "[]");
  EXPECT_TRUE(check_hyperparameters(fixtures::tree(1), ra).empty());
  EXPECT_EQ(decide_verdict(check_hyperparameters(fixtures::tree(1), ra), false, {}, ra.attack_thresholds),
            Verdict::recommend_release);
}

TEST(RiskAppetiteFile, SchemaViolations) {
  const std::string t = kThresholds;
  violation_of("[]");
  violation_of(R"({"attack_thresholds": {"max_mia_auc": 0.6, "max_arr": 1.2, "min_pvalue": 0.05}})");
  violation_of(R"({"models": {}})");
  EXPECT_NE(violation_of(R"({"models": {"decision_tree": [{"param": "x", "op": "<", "value": 1}]}, )" + t + "}")
                .find("/models/decision_tree/0/severity"),
            std::string::npos);
  violation_of(R"({"models": {"decision_tree": [{"param": "", "op": "<", "value": 1, "severity": "fail"}]}, )" + t + "}");
  violation_of(R"({"models": {"decision_tree": [{"param": "x", "op": "<", "value": "big", "severity": "fail"}]}, )" + t + "}");
  violation_of(R"({"models": {"decision_tree": [{"param": "x", "op": "in", "value": 3, "severity": "fail"}]}, )" + t + "}");
  violation_of(R"({"models": {"decision_tree": [{"all_of": [], "severity": "fail"}]}, )" + t + "}");
  violation_of(R"({"models": {"decision_tree": [{"param": "x", "op": "<", "value": 1, "severity": "error"}]}, )" + t + "}");
  EXPECT_NE(violation_of(R"({"models": {"decision_tree": [{"any_of": [{"param": "x", "op": "~", "value": 1}],
                                                           "severity": "warn"}]}, )" + t + "}")
                .find("/models/decision_tree/0/any_of/0/op"),
            std::string::npos);
  violation_of(R"({"models": {}, "attack_thresholds": {"max_mia_auc": 0.4, "max_arr": 1.2, "min_pvalue": 0.05}})");
  violation_of(R"({"models": {}, "attack_thresholds": {"max_mia_auc": 0.6, "max_arr": 0.9, "min_pvalue": 0.05}})");
  violation_of(R"({"models": {}, "attack_thresholds": {"max_mia_auc": 0.6, "max_arr": 1.2, "min_pvalue": 1}})");
  violation_of(R"({"models": {}, "attack_thresholds": {"max_mia_auc": 0.6, "max_arr": 1.2}})");
}

TEST(CheckHyperparameters, LeafRuleExamples) {
  const auto ra = fixtures::leaf_appetite();
  const auto bad = check_hyperparameters(fixtures::tree(1), ra);
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_FALSE(bad[0].satisfied);
  EXPECT_EQ(bad[0].severity, Severity::fail);
  EXPECT_EQ(bad[0].observed, json({{"min_samples_leaf", 1}}));
  EXPECT_EQ(bad[0].message, "min_samples_leaf must be at least 5");

  EXPECT_TRUE(check_hyperparameters(fixtures::tree(10), ra)[0].satisfied);
  EXPECT_FALSE(check_hyperparameters(fixtures::forest(10, 1), ra)[0].satisfied);
  // No rules for logistic regression: nothing to report.
  Hyperparameters lr;
  lr.model_kind = ModelKind::logistic_regression;
  EXPECT_TRUE(check_hyperparameters(lr, ra).empty());
}

TEST(CheckHyperparameters, ReportedEpsilonOfAnExternalModel) {
  const auto ra =
      appetite_with("external", R"([{"param": "epsilon", "op": "<=", "value": 10, "severity": "fail"}])");
  const auto out = check_hyperparameters(external({{"epsilon", std::int64_t{100}}}), ra);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_FALSE(out[0].satisfied);
  EXPECT_EQ(out[0].message, "epsilon <= 10");
  EXPECT_TRUE(check_hyperparameters(external({{"epsilon", 0.5}}), ra)[0].satisfied);
}

TEST(CheckHyperparameters, AbsentParameterIsUnsatisfied) {
  const auto out = check_hyperparameters(Hyperparameters{}, fixtures::leaf_appetite());
  ASSERT_EQ(out.size(), 1u);
  EXPECT_FALSE(out[0].satisfied);
  EXPECT_EQ(out[0].note, "parameter absent");
  EXPECT_TRUE(out[0].observed["min_samples_leaf"].is_null());
}

TEST(CheckHyperparameters, OperatorsOverScalarTypes) {
  auto holds = [](const std::string& rule, const Hyperparameters& h) {
    return check_hyperparameters(h, appetite_with("external", "[" + rule + "]"))[0].satisfied;
  };
  const auto h = external({{"n", std::int64_t{3}}, {"r", 0.25}, {"s", std::string("gini")}, {"b", true}});
  EXPECT_TRUE(holds(R"({"param":"n","op":"<","value":4,"severity":"warn"})", h));
  EXPECT_FALSE(holds(R"({"param":"n","op":"<","value":3,"severity":"warn"})", h));
  EXPECT_TRUE(holds(R"({"param":"n","op":"<=","value":3,"severity":"warn"})", h));
  EXPECT_TRUE(holds(R"({"param":"n","op":">","value":2.5,"severity":"warn"})", h));
  EXPECT_TRUE(holds(R"({"param":"n","op":"=","value":3.0,"severity":"warn"})", h));
  EXPECT_TRUE(holds(R"({"param":"n","op":"≠","value":4,"severity":"warn"})", h));
  EXPECT_TRUE(holds(R"({"param":"r","op":"<","value":0.5,"severity":"warn"})", h));
  EXPECT_TRUE(holds(R"({"param":"s","op":"==","value":"gini","severity":"warn"})", h));
  EXPECT_TRUE(holds(R"({"param":"s","op":"in","value":["entropy","gini"],"severity":"warn"})", h));
  EXPECT_TRUE(holds(R"({"param":"s","op":"not-in","value":["entropy"],"severity":"warn"})", h));
  EXPECT_TRUE(holds(R"({"param":"b","op":"==","value":true,"severity":"warn"})", h));
  EXPECT_FALSE(holds(R"({"param":"b","op":"==","value":1,"severity":"warn"})", h));
  const auto mismatch = check_hyperparameters(
      h, appetite_with("external", R"([{"param":"s","op":">=","value":1,"severity":"warn"}])"))[0];
  EXPECT_FALSE(mismatch.satisfied);
  EXPECT_NE(mismatch.note.find("type mismatch"), std::string::npos);
}

TEST(CheckHyperparameters, RandomRuleTreesMatchBruteForce) {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    json rules = json::array();
    for (std::size_t k = 0, n = 1 + rng.uniform_index(4); k < n; ++k) {
      json r = random_rule(rng, 3);
      r["severity"] = rng.uniform_index(2) ? "warn" : "fail";
      rules.push_back(r);
    }
    const auto ra = appetite_with("external", rules.dump());
    std::map<std::string, double> values;
    Hyperparameters h;
    h.model_kind = ModelKind::external;
    for (const char* p : {"a", "b", "c"}) {
      if (rng.uniform_index(5) == 0) continue;  // sometimes absent
      const auto v = static_cast<std::int64_t>(rng.uniform_index(5));
      values[p] = static_cast<double>(v);
      h.entries[p] = v;
    }
    const auto out = check_hyperparameters(h, ra);
    ASSERT_EQ(out.size(), rules.size());
    for (std::size_t k = 0; k < rules.size(); ++k) EXPECT_EQ(out[k].satisfied, brute_eval(rules[k], values)) << rules[k];

    // Reversing the rule list reverses the outcomes and changes nothing else.
    json reversed = json::array();
    for (auto it = rules.rbegin(); it != rules.rend(); ++it) reversed.push_back(*it);
    const auto back = check_hyperparameters(h, appetite_with("external", reversed.dump()));
    for (std::size_t k = 0; k < rules.size(); ++k) EXPECT_EQ(back[rules.size() - 1 - k], out[k]);
  }
}

TEST(UnretrainedChange, DetectsEditsButNotReordering) {
  const auto d = fixtures::noisy_linear(40, 2, 0.1, 3);
  const auto s = split_dataset(d, 0.3, 3);
  Hyperparameters h = fixtures::tree(5);
  h.entries["max_depth"] = std::int64_t{4};
  const auto m = fit(h, d, s);
  EXPECT_FALSE(detect_unretrained_change(m, h));
  auto edited = h;
  edited.entries["min_samples_leaf"] = std::int64_t{1};
  EXPECT_TRUE(detect_unretrained_change(m, edited));
  const auto reordered = hyperparameters_from_json(
      json::parse(R"({"model_kind":"decision_tree","seed":0,"entries":{"min_samples_leaf":5,"max_depth":4}})"));
  EXPECT_FALSE(detect_unretrained_change(m, reordered));

  TrainedModel blank = m;
  blank.fitted_hyperparameter_digest.clear();
  try {
    detect_unretrained_change(blank, h);
    FAIL();
  } catch (const AuditError& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingDigest);
  }
}

TEST(Verdict, DecisionTable) {
  const AttackThresholds t{0.6, 1.2, 0.05};
  const RuleOutcome ok{"ok", Severity::fail, true, json::object(), ""};
  const RuleOutcome warned{"w", Severity::warn, false, json::object(), ""};
  const RuleOutcome failed{"f", Severity::fail, false, json::object(), ""};
  AttackEvidence quiet{{{0.52, 0.4}}, {std::optional<double>(1.0), std::nullopt}, false};

  EXPECT_EQ(decide_verdict({ok}, false, quiet, t), Verdict::recommend_release);
  EXPECT_EQ(decide_verdict({ok, warned}, false, quiet, t), Verdict::recommend_review);
  EXPECT_EQ(decide_verdict({ok, failed}, false, quiet, t), Verdict::recommend_reject);
  EXPECT_EQ(decide_verdict({ok}, true, quiet, t), Verdict::recommend_review);
  EXPECT_EQ(decide_verdict({ok}, false, quiet, std::nullopt), Verdict::recommend_review);

  AttackEvidence loud = quiet;
  loud.membership.push_back({0.75, 0.09});
  EXPECT_EQ(decide_verdict({ok}, false, loud, t), Verdict::recommend_reject);
  AttackEvidence leaky = quiet;
  leaky.arr.push_back(std::numeric_limits<double>::infinity());
  EXPECT_EQ(decide_verdict({ok}, false, leaky, t), Verdict::recommend_reject);
  AttackEvidence significant = quiet;
  significant.membership.push_back({0.55, 0.01});
  EXPECT_EQ(decide_verdict({ok}, false, significant, t), Verdict::recommend_review);
  AttackEvidence broken = quiet;
  broken.errors = true;
  EXPECT_EQ(decide_verdict({ok}, false, broken, t), Verdict::recommend_review);
  // Thresholds are strict: equal to the ceiling is still acceptable.
  AttackEvidence edge{{{0.6, 0.05}}, {std::optional<double>(1.2)}, false};
  EXPECT_EQ(decide_verdict({ok}, false, edge, t), Verdict::recommend_release);
}

TEST(Verdict, AddingAFailedRuleNeverImprovesIt) {
  Rng rng(12);
  const AttackThresholds t{0.6, 1.2, 0.05};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<RuleOutcome> outcomes;
    for (std::size_t k = 0, n = rng.uniform_index(5); k < n; ++k) {
      outcomes.push_back({"r", rng.uniform_index(2) ? Severity::warn : Severity::fail, rng.uniform_index(2) == 1,
                          json::object(), ""});
    }
    AttackEvidence e;
    for (std::size_t k = 0, n = rng.uniform_index(3); k < n; ++k) e.membership.push_back({0.4 + 0.4 * rng.uniform01(), rng.uniform01()});
    for (std::size_t k = 0, n = rng.uniform_index(3); k < n; ++k) e.arr.push_back(2.0 * rng.uniform01());
    e.errors = rng.uniform_index(4) == 0;
    const bool changed = rng.uniform_index(3) == 0;
    const auto thresholds = rng.uniform_index(5) ? std::optional<AttackThresholds>(t) : std::nullopt;

    const auto before = decide_verdict(outcomes, changed, e, thresholds);
    outcomes.insert(outcomes.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(outcomes.size() + 1)),
                    RuleOutcome{"added", Severity::fail, false, json::object(), ""});
    const auto after = decide_verdict(outcomes, changed, e, thresholds);
    EXPECT_GE(rank(after), rank(before));
    EXPECT_EQ(after, Verdict::recommend_reject);
  }
}
