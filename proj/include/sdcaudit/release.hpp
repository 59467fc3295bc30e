#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sdcaudit/attack_attribute.hpp"
#include "sdcaudit/attack_membership.hpp"
#include "sdcaudit/data.hpp"
#include "sdcaudit/models.hpp"
#include "sdcaudit/predictions.hpp"
#include "sdcaudit/report.hpp"
#include "sdcaudit/safecheck.hpp"

namespace sdcaudit {

inline constexpr std::string_view kWorstCaseId = "worst_case";
inline constexpr std::string_view kLiraId = "lira";
inline constexpr std::string_view kAttributeId = "attribute";

/// Which post-hoc attacks to run; an empty optional means "not configured".
struct AttackSuiteConfig {
  std::optional<WorstCaseConfig> worst_case;
  std::optional<LiraConfig> lira;
  std::optional<AttributeAttackConfig> attribute;

  bool empty() const { return !worst_case && !lira && !attribute; }
};

struct ReleaseDecision {
  std::vector<RuleOutcome> ante_hoc;
  bool digest_changed = false;
  std::vector<std::string> attacks_run;
  Verdict verdict = Verdict::recommend_review;
};

struct ReleaseOutcome {
  ReleaseDecision decision;
  ReportDocument report;
};

namespace detail {

inline bool any_failed(const std::vector<RuleOutcome>& outcomes) {
  return std::any_of(outcomes.begin(), outcomes.end(),
                     [](const RuleOutcome& o) { return !o.satisfied && o.severity == Severity::fail; });
}

/// With nothing configured but a reason to attack, the worst-case membership
/// attack runs with its defaults.
inline AttackSuiteConfig effective_suite(AttackSuiteConfig suite, bool triggered, std::uint64_t seed) {
  if (suite.empty() && triggered) {
    suite.worst_case.emplace();
    suite.worst_case->seed = seed;
  }
  return suite;
}

inline ReleaseOutcome finish(ReportDocument report, const std::optional<AttackThresholds>& thresholds) {
  report.attack_thresholds = thresholds;
  report.top_risk_records = top_risk_records(report.attacks);
  report.verdict = recompute_verdict(report);
  ReleaseOutcome out;
  out.decision.ante_hoc = report.ante_hoc.outcomes;
  out.decision.digest_changed = report.ante_hoc.digest_changed;
  out.decision.attacks_run = report.attacks_run;
  out.decision.verdict = report.verdict;
  out.report = std::move(report);
  return out;
}

template <typename Fn>
void run_attack(ReportDocument& report, std::string_view id, Fn&& fn) {
  report.attacks_run.emplace_back(id);
  try {
    report.attacks[std::string(id)] = fn();
  } catch (const AuditError& e) {
    report.attack_errors[std::string(id)] = e.what();
  }
}

}  // namespace detail

/// Full release check for a fitted zoo model: ante-hoc rules, unretrained
/// change detection, then every configured attack (in id order). Attack
/// failures are recorded in the report and the other attacks still run.
inline ReleaseOutcome request_release(const TrainedModel& m, const Dataset& d, const Split& s,
                                      const RiskAppetite& ra, const AttackSuiteConfig& config,
                                      ReportMetadata metadata) {
  ReportDocument report;
  report.metadata = std::move(metadata);
  report.ante_hoc.model_kind = std::string(to_string(m.hyperparameters.model_kind));
  report.ante_hoc.outcomes = check_hyperparameters(m.hyperparameters, ra);
  report.ante_hoc.digest_changed = detect_unretrained_change(m, m.hyperparameters);

  const bool triggered = report.ante_hoc.digest_changed || detail::any_failed(report.ante_hoc.outcomes);
  const auto suite = detail::effective_suite(config, triggered, report.metadata.seed);

  if (suite.attribute) {
    detail::run_attack(report, kAttributeId, [&]() -> AttackReport {
      return run_attribute_attack(m, d, s, *suite.attribute).attributes;
    });
  }
  if (suite.lira) {
    detail::run_attack(report, kLiraId, [&]() -> AttackReport { return run_lira(d, s, m, *suite.lira); });
  }
  if (suite.worst_case) {
    detail::run_attack(report, kWorstCaseId, [&]() -> AttackReport {
      return run_worst_case(target_predictions(m, d, s), *suite.worst_case);
    });
  }
  return detail::finish(std::move(report), ra.attack_thresholds);
}

/// Model-agnostic release check from saved predictions. Only the worst-case
/// membership attack can run; `reported` (if any) feeds the ante-hoc rules.
inline ReleaseOutcome request_release_from_predictions(const PredictionsTable& preds,
                                                       const std::optional<Hyperparameters>& reported,
                                                       const std::optional<RiskAppetite>& ra,
                                                       const AttackSuiteConfig& config, ReportMetadata metadata) {
  if (config.lira || config.attribute) {
    throw AuditError(ErrorCode::Usage, "LiRA and attribute attacks need the dataset; not available from predictions");
  }
  ReportDocument report;
  report.metadata = std::move(metadata);
  if (reported) {
    report.ante_hoc.model_kind = std::string(to_string(reported->model_kind));
    if (ra) report.ante_hoc.outcomes = check_hyperparameters(*reported, *ra);
  }
  const auto suite = detail::effective_suite(config, detail::any_failed(report.ante_hoc.outcomes), report.metadata.seed);
  if (suite.worst_case) {
    detail::run_attack(report, kWorstCaseId, [&]() -> AttackReport { return run_worst_case(preds, *suite.worst_case); });
  }
  std::optional<AttackThresholds> thresholds;
  if (ra) thresholds = ra->attack_thresholds;
  return detail::finish(std::move(report), thresholds);
}

}  // namespace sdcaudit
