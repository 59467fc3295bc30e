// Fits two decision trees on a synthetic table, one within the sample risk
// appetite and one that memorises, and prints the release report for each.
//
//   release_walkthrough [out-dir]

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sdcaudit/sdcaudit.hpp"

using namespace sdcaudit;

namespace {

Dataset synthetic_table(std::size_t n, std::uint64_t seed) {
  FeatureSchema schema;
  schema.label = "outcome";
  schema.n_classes = 2;
  schema.attributes = {{"age", Continuous{18, 90}},
                       {"region", Categorical{{"north", "south", "east", "west"}}},
                       {"income", Continuous{0, 200}}};
  Dataset d;
  d.schema = schema;
  d.rows = Matrix(0, schema.width());
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double age = 18 + 72 * rng.uniform01();
    const double region = static_cast<double>(rng.uniform_index(4));
    const double income = 200 * rng.uniform01();
    const double noise = rng.uniform01() - 0.5;
    const double row[] = {age, region, income};
    d.rows.push_row(row);
    d.labels.push_back((age - 50) / 40 + (income - 100) / 100 + noise > 0 ? 1 : 0);
  }
  return d;
}

RiskAppetite appetite() {
  return risk_appetite_from_json(nlohmann::json::parse(R"({
    "models": {"decision_tree": [
      {"param": "min_samples_leaf", "op": ">=", "value": 5, "severity": "fail",
       "message": "leaves must cover at least 5 records"}]},
    "attack_thresholds": {"max_mia_auc": 0.6, "max_arr": 1.2, "min_pvalue": 0.05}})"));
}

}  // namespace

int main(int argc, char** argv) {
  const auto data = synthetic_table(400, 3);
  const auto split = split_dataset(data, 0.3, 3);

  AttackSuiteConfig suite;
  suite.worst_case.emplace();
  suite.worst_case->n_repetitions = 5;
  suite.attribute.emplace();

  for (const auto* name : {"safe", "risky"}) {
    Hyperparameters h;
    h.model_kind = ModelKind::decision_tree;
    h.seed = 3;
    h.entries["min_samples_leaf"] = std::int64_t{std::string(name) == "safe" ? 20 : 1};
    const auto model = fit(h, data, split);

    ReportMetadata meta;
    meta.seed = 3;
    meta.timestamp = "2026-01-01T00:00:00Z";
    const auto outcome = request_release(model, data, split, appetite(), suite, meta);
    std::cout << "== " << name << " model: " << to_string(outcome.decision.verdict) << "\n";
    if (argc > 1) {
      std::filesystem::create_directories(argv[1]);
      std::ofstream(std::filesystem::path(argv[1]) / (std::string(name) + ".md")) << render_markdown(outcome.report);
    } else {
      std::cout << render_markdown(outcome.report) << "\n";
    }
  }
}
