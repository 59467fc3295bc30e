#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sdcaudit/data.hpp"
#include "sdcaudit/error.hpp"
#include "sdcaudit/models.hpp"

namespace sdcaudit {

struct AttributeAttackConfig {
  double confidence_threshold = 0.8;
  std::size_t grid_size = 100;
  double protection_band = 0.10;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
      throw AuditError(ErrorCode::Usage, "confidence_threshold must lie in [0, 1]");
    }
    if (grid_size < 2) throw AuditError(ErrorCode::Usage, "grid_size must be >= 2");
    if (!(protection_band >= 0.0)) throw AuditError(ErrorCode::Usage, "protection_band must be >= 0");
  }
};

inline constexpr double kPeakTolerance = 1e-9;

enum class AttributeDecision { predicted, dont_know };

struct RecordAttackOutcome {
  std::size_t record = 0;
  std::string attribute;
  AttributeDecision decision = AttributeDecision::dont_know;
  // Predicted completion: a single value (categorical level index) or the
  // [low, high] grid range attaining the peak (continuous; low == high for
  // a one-point run).
  double predicted_low = 0.0;
  double predicted_high = 0.0;
  bool correct = false;
  double peak_confidence = 0.0;
};

struct AttributeRiskResult {
  std::string attribute;
  double fraction_train = 0.0;
  double fraction_test = 0.0;
  std::optional<double> arr;  // empty = not applicable; may be +infinity
  bool leaking = false;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t vulnerable_train = 0;
  std::size_t vulnerable_test = 0;
  std::size_t predicted_incorrect_train = 0;
  std::size_t predicted_incorrect_test = 0;
};

struct AttributeAttackResult {
  std::vector<AttributeRiskResult> attributes;
  std::vector<RecordAttackOutcome> outcomes;
};

/// ARR = fraction_train / fraction_test; +inf when only the test fraction is
/// zero; not applicable when both are.
inline std::optional<double> attribute_risk_ratio(double fraction_train, double fraction_test) {
  if (fraction_test > 0.0) return fraction_train / fraction_test;
  if (fraction_train > 0.0) return std::numeric_limits<double>::infinity();
  return std::nullopt;
}

/// Leakage is flagged only when ARR(a) > 1.
inline bool is_leaking(const std::optional<double>& arr) { return arr.has_value() && *arr > 1.0; }

namespace detail {

inline std::size_t argmax(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

/// Acceptance band around the true value: multiplicative, or absolute
/// 0.1 * range when the true value is zero.
inline std::pair<double, double> protection_interval(double truth, const Continuous& range, double band) {
  if (truth == 0.0) {
    const double half = band * (range.max - range.min);
    return {-half, half};
  }
  const double a = (1.0 - band) * truth;
  const double b = (1.0 + band) * truth;
  return {std::min(a, b), std::max(a, b)};
}

}  // namespace detail

/// Exhaustive completion search for one record and one attribute.
template <ProbabilisticClassifier Target>
RecordAttackOutcome attack_record(const Target& target, const FeatureSchema& schema, std::span<const double> row,
                                  std::size_t true_label, const std::string& attribute,
                                  const AttributeAttackConfig& cfg) {
  const std::size_t column = schema.index_of(attribute);
  if (row.size() != schema.width()) {
    throw AuditError(ErrorCode::ShapeMismatch, "record has width " + std::to_string(row.size()) +
                                                   ", schema has " + std::to_string(schema.width()));
  }
  if (true_label >= target.n_classes()) {
    throw AuditError(ErrorCode::ShapeMismatch, "true label outside the model's classes");
  }
  const AttributeSpec& spec = schema.attributes[column];
  const auto candidates = candidate_values(spec, cfg.grid_size);

  std::vector<double> completed(row.begin(), row.end());
  std::vector<double> confidence;
  confidence.reserve(candidates.size());
  for (double v : candidates) {
    completed[column] = v;
    confidence.push_back(target.predict_row(completed)[true_label]);
  }

  RecordAttackOutcome out;
  out.attribute = attribute;
  out.peak_confidence = *std::max_element(confidence.begin(), confidence.end());
  if (out.peak_confidence < cfg.confidence_threshold) return out;

  const double truth = row[column];
  if (spec.is_categorical()) {
    const auto n_peaks = std::count(confidence.begin(), confidence.end(), out.peak_confidence);
    if (n_peaks != 1) return out;
    const auto at = static_cast<std::size_t>(std::find(confidence.begin(), confidence.end(), out.peak_confidence) -
                                             confidence.begin());
    out.decision = AttributeDecision::predicted;
    out.predicted_low = out.predicted_high = candidates[at];
    completed[column] = candidates[at];
    const auto label_completed = detail::argmax(target.predict_row(completed));
    const auto label_actual = detail::argmax(target.predict_row(row));
    out.correct = candidates[at] == truth && label_completed == label_actual;
    return out;
  }

  std::size_t first = candidates.size(), last = 0, count = 0;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    if (confidence[i] >= out.peak_confidence - kPeakTolerance) {
      first = std::min(first, i);
      last = i;
      ++count;
    }
  }
  if (last - first + 1 != count) return out;  // peak set is not one unbroken run
  out.decision = AttributeDecision::predicted;
  out.predicted_low = candidates[first];
  out.predicted_high = candidates[last];
  const auto [lo, hi] = detail::protection_interval(truth, spec.continuous(), cfg.protection_band);
  out.correct = out.predicted_low >= lo && out.predicted_high <= hi;
  return out;
}

/// Runs attack_record over every attribute of every train and test record
/// and aggregates the vulnerable fractions into ARR(a).
template <ProbabilisticClassifier Target>
AttributeAttackResult run_attribute_attack(const Target& target, const Dataset& d, const Split& s,
                                           const AttributeAttackConfig& cfg) {
  cfg.validate();
  if (s.train_indices.empty() || s.test_indices.empty()) {
    throw AuditError(ErrorCode::TooFewRecords, "attribute attack needs non-empty train and test parts");
  }
  AttributeAttackResult result;
  for (const auto& attr : d.schema.attributes) {
    AttributeRiskResult risk;
    risk.attribute = attr.name;
    risk.n_train = s.train_indices.size();
    risk.n_test = s.test_indices.size();
    auto run_part = [&](const std::vector<std::size_t>& part, std::size_t& vulnerable, std::size_t& wrong) {
      for (auto i : part) {
        auto outcome = attack_record(target, d.schema, d.rows.row(i), d.labels[i], attr.name, cfg);
        outcome.record = i;
        if (outcome.decision == AttributeDecision::predicted) ++(outcome.correct ? vulnerable : wrong);
        result.outcomes.push_back(std::move(outcome));
      }
    };
    run_part(s.train_indices, risk.vulnerable_train, risk.predicted_incorrect_train);
    run_part(s.test_indices, risk.vulnerable_test, risk.predicted_incorrect_test);
    risk.fraction_train = static_cast<double>(risk.vulnerable_train) / static_cast<double>(risk.n_train);
    risk.fraction_test = static_cast<double>(risk.vulnerable_test) / static_cast<double>(risk.n_test);
    risk.arr = attribute_risk_ratio(risk.fraction_train, risk.fraction_test);
    risk.leaking = is_leaking(risk.arr);
    result.attributes.push_back(std::move(risk));
  }
  return result;
}

}  // namespace sdcaudit
