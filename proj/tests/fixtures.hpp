#pragma once

#include <string>
#include <vector>

#include "sdcaudit/sdcaudit.hpp"

namespace fixtures {

using namespace sdcaudit;

inline FeatureSchema continuous_schema(std::size_t width, std::size_t n_classes = 2) {
  FeatureSchema schema;
  schema.label = "y";
  schema.n_classes = n_classes;
  for (std::size_t c = 0; c < width; ++c) schema.attributes.push_back({"x" + std::to_string(c), Continuous{0.0, 1.0}});
  return schema;
}

inline Dataset from_rows(const FeatureSchema& schema, const std::vector<std::vector<double>>& rows,
                         const std::vector<std::size_t>& labels) {
  Dataset d;
  d.schema = schema;
  d.rows = Matrix(0, schema.width());
  for (const auto& r : rows) d.rows.push_row(r);
  d.labels = labels;
  d.validate();
  return d;
}

/// Binary data: label = [sum of the first half of the features > the sum of
/// the second half], then flipped with probability `flip`.
inline Dataset noisy_linear(std::size_t n, std::size_t width, double flip, std::uint64_t seed) {
  Dataset d;
  d.schema = continuous_schema(width);
  d.rows = Matrix(0, width);
  Rng rng(seed);
  std::vector<double> row(width);
  for (std::size_t i = 0; i < n; ++i) {
    double margin = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      row[c] = rng.uniform01();
      margin += c < width / 2 ? row[c] : -row[c];
    }
    std::size_t label = margin > 0.0 ? 1 : 0;
    if (rng.uniform01() < flip) label = 1 - label;
    d.rows.push_row(row);
    d.labels.push_back(label);
  }
  return d;
}

/// Binary data: label = [x0 + ... + x(k-1) > k/2] over the first k of
/// `width` uniform features, then flipped with probability `flip`.
inline Dataset informative_subset(std::size_t n, std::size_t width, std::size_t k, double flip, std::uint64_t seed) {
  Dataset d;
  d.schema = continuous_schema(width);
  d.rows = Matrix(0, width);
  Rng rng(seed);
  std::vector<double> row(width);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      row[c] = rng.uniform01();
      if (c < k) sum += row[c];
    }
    std::size_t label = sum > static_cast<double>(k) / 2.0 ? 1 : 0;
    if (rng.uniform01() < flip) label = 1 - label;
    d.rows.push_row(row);
    d.labels.push_back(label);
  }
  return d;
}

/// a1 (categorical, 25 levels) fixes the label; a2 (continuous) is noise.
/// Levels 0..4 are common, levels 5..24 occur once each.
inline Dataset attribute_fixture(std::uint64_t seed) {
  constexpr std::size_t kLevels = 25;
  FeatureSchema schema;
  schema.label = "y";
  schema.n_classes = kLevels;
  Categorical a1;
  for (std::size_t l = 0; l < kLevels; ++l) a1.levels.push_back("v" + std::to_string(l));
  schema.attributes = {{"a1", a1}, {"a2", Continuous{0.0, 1.0}}};

  Dataset d;
  d.schema = schema;
  d.rows = Matrix(0, 2);
  Rng rng(seed);
  auto add = [&](std::size_t level) {
    const double row[] = {static_cast<double>(level), rng.uniform01()};
    d.rows.push_row(row);
    d.labels.push_back(level);
  };
  for (std::size_t level = 0; level < 5; ++level) {
    for (std::size_t k = 0; k < 20 + 5 * level; ++k) add(level);
  }
  for (std::size_t level = 5; level < kLevels; ++level) add(level);
  return d;
}

inline Hyperparameters tree(std::int64_t min_samples_leaf, std::uint64_t seed = 0) {
  Hyperparameters h;
  h.model_kind = ModelKind::decision_tree;
  h.seed = seed;
  h.entries["min_samples_leaf"] = min_samples_leaf;
  return h;
}

inline Hyperparameters forest(std::int64_t n_estimators, std::int64_t min_samples_leaf, std::uint64_t seed = 0) {
  Hyperparameters h;
  h.model_kind = ModelKind::random_forest;
  h.seed = seed;
  h.entries["n_estimators"] = n_estimators;
  h.entries["min_samples_leaf"] = min_samples_leaf;
  return h;
}

inline RiskAppetite appetite(const std::string& json_text) {
  return risk_appetite_from_json(nlohmann::json::parse(json_text));
}

/// The example appetite: DT/RF need min_samples_leaf >= 5.
inline RiskAppetite leaf_appetite(double max_mia_auc = 0.6, double max_arr = 1.2, double min_pvalue = 0.05) {
  nlohmann::json rule = {{"param", "min_samples_leaf"}, {"op", ">="}, {"value", 5}, {"severity", "fail"},
                         {"message", "min_samples_leaf must be at least 5"}};
  nlohmann::json j = {{"models", {{"decision_tree", {rule}}, {"random_forest", {rule}}}},
                      {"attack_thresholds",
                       {{"max_mia_auc", max_mia_auc}, {"max_arr", max_arr}, {"min_pvalue", min_pvalue}}}};
  return risk_appetite_from_json(j);
}

}  // namespace fixtures
