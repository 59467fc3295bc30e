#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdcaudit/data.hpp"
#include "sdcaudit/error.hpp"
#include "sdcaudit/metrics.hpp"
#include "sdcaudit/models.hpp"
#include "sdcaudit/predictions.hpp"
#include "sdcaudit/random.hpp"

namespace sdcaudit {

/// Seed offset separating shuffled-label baseline runs from real ones.
inline constexpr std::uint64_t kBaselineSeedOffset = 1'000'003;

inline Hyperparameters default_attack_model() {
  Hyperparameters h;
  h.model_kind = ModelKind::random_forest;
  h.entries["n_estimators"] = std::int64_t{100};
  h.entries["min_samples_leaf"] = std::int64_t{1};
  return h;
}

struct WorstCaseConfig {
  std::size_t n_repetitions = 10;
  double attack_test_fraction = 0.3;
  Hyperparameters attack_model = default_attack_model();
  std::size_t n_baseline = 10;
  bool sort_probabilities = true;
  // Appends a 0/1 "target predicted the true class" column when the table
  // carries true labels.
  bool include_correct_feature = true;
  std::vector<double> fpr_levels = metrics::default_fpr_levels();
  std::uint64_t seed = 0;

  void validate() const {
    if (n_repetitions < 1) throw AuditError(ErrorCode::Usage, "n_repetitions must be >= 1");
    if (!(attack_test_fraction > 0.0 && attack_test_fraction < 1.0)) {
      throw AuditError(ErrorCode::Usage, "attack_test_fraction must lie in (0, 1)");
    }
    if (attack_model.model_kind == ModelKind::external) {
      throw AuditError(ErrorCode::Usage, "attack model must be a zoo kind");
    }
    sdcaudit::validate(attack_model);
  }
};

struct LiraConfig {
  std::size_t n_shadow_models = 64;
  double shadow_fraction = 0.5;
  std::optional<Hyperparameters> shadow_hyperparameters;  // empty = copy of the target's
  std::size_t n_baseline = 10;
  double sigma_floor = metrics::kDefaultSigmaFloor;
  std::vector<double> fpr_levels = metrics::default_fpr_levels();
  std::uint64_t seed = 0;

  void validate() const {
    if (n_shadow_models < 2) throw AuditError(ErrorCode::Usage, "n_shadow_models must be >= 2");
    if (!(shadow_fraction > 0.0 && shadow_fraction < 1.0)) {
      throw AuditError(ErrorCode::Usage, "shadow_fraction must lie in (0, 1)");
    }
  }
};

struct RecordScore {
  std::size_t record = 0;
  double score = 0.5;
  bool member = false;
  bool evaluated = true;  // false: never held out (worst-case) / no out-samples (LiRA)
};

struct MembershipAttackResult {
  metrics::RocSummary summary;
  double p_value = 1.0;
  std::vector<RecordScore> per_record;
  std::vector<double> per_repetition_auc;
  std::vector<double> baseline_auc;
};

namespace detail {

/// Attack feature rows: optionally sorted probabilities, optionally followed
/// by the target-correctness indicator.
inline Matrix attack_features(const PredictionsTable& preds, const WorstCaseConfig& cfg) {
  const bool add_correct = cfg.include_correct_feature && preds.true_labels.has_value();
  Matrix out(preds.size(), preds.n_classes() + (add_correct ? 1 : 0));
  for (std::size_t r = 0; r < preds.size(); ++r) {
    auto src = preds.rows.row(r);
    auto dst = out.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    if (cfg.sort_probabilities) std::sort(dst.begin(), dst.begin() + src.size(), std::greater<>());
    if (add_correct) {
      const auto predicted = static_cast<std::size_t>(std::max_element(src.begin(), src.end()) - src.begin());
      dst[src.size()] = predicted == (*preds.true_labels)[r] ? 1.0 : 0.0;
    }
  }
  return out;
}

struct RepetitionOutcome {
  metrics::RocSummary summary;
  std::vector<std::size_t> test_records;
  std::vector<double> test_scores;
};

inline RepetitionOutcome worst_case_repetition(const Matrix& features, const std::vector<bool>& membership,
                                               const WorstCaseConfig& cfg, std::uint64_t seed) {
  std::vector<std::size_t> members, others;
  for (std::size_t i = 0; i < membership.size(); ++i) (membership[i] ? members : others).push_back(i);
  const std::size_t k = std::min(members.size(), others.size());

  Rng rng(seed);
  auto pick = [&](const std::vector<std::size_t>& pool) {
    auto positions = rng.sample_without_replacement(pool.size(), k);
    std::sort(positions.begin(), positions.end());
    std::vector<std::size_t> chosen;
    for (auto p : positions) chosen.push_back(pool[p]);
    return chosen;
  };
  std::vector<std::size_t> chosen = pick(members);
  const auto chosen_others = pick(others);
  chosen.insert(chosen.end(), chosen_others.begin(), chosen_others.end());

  Dataset attack_data;
  attack_data.schema.label = "member";
  attack_data.schema.n_classes = 2;
  for (std::size_t c = 0; c < features.cols(); ++c) {
    attack_data.schema.attributes.push_back({"f" + std::to_string(c), Continuous{0.0, 1.0}});
  }
  attack_data.rows = features.select_rows(chosen);
  for (auto i : chosen) attack_data.labels.push_back(membership[i] ? 1 : 0);

  const Split split = split_dataset(attack_data, cfg.attack_test_fraction, seed);
  Hyperparameters h = cfg.attack_model;
  h.seed = seed;
  const TrainedModel attack_model = fit(h, attack_data, split);

  RepetitionOutcome out;
  metrics::ScoredLabels scored;
  for (auto local : split.test_indices) {
    const double score = attack_model.predict_row(attack_data.rows.row(local))[1];
    out.test_records.push_back(chosen[local]);
    out.test_scores.push_back(score);
    scored.scores.push_back(score);
    scored.labels.push_back(attack_data.labels[local] == 1);
  }
  out.summary = metrics::summarise(scored, cfg.fpr_levels);
  return out;
}

/// Keeps a CDF value strictly inside (0, 1); Phi rounds to 0 or 1 in the tails.
inline double open_unit(double p) {
  return std::clamp(p, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

inline std::vector<bool> shuffled(std::vector<bool> labels, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = labels.size(); i > 1; --i) {
    const auto j = rng.uniform_index(i);
    const bool tmp = labels[i - 1];
    labels[i - 1] = labels[j];
    labels[j] = tmp;
  }
  return labels;
}

}  // namespace detail

/// Worst-case membership attack: an attack model learns membership directly
/// from the target's outputs on the true train/test split.
inline MembershipAttackResult run_worst_case(const PredictionsTable& preds, const WorstCaseConfig& cfg) {
  cfg.validate();
  if (!preds.membership || preds.membership->size() != preds.size()) {
    throw AuditError(ErrorCode::TooFewRecords, "predictions carry no membership labels");
  }
  const auto& membership = *preds.membership;
  const auto n_members = static_cast<std::size_t>(std::count(membership.begin(), membership.end(), true));
  if (n_members < 2 || membership.size() - n_members < 2) {
    throw AuditError(ErrorCode::TooFewRecords, "need >= 2 members and >= 2 non-members, have " +
                                                   std::to_string(n_members) + " and " +
                                                   std::to_string(membership.size() - n_members));
  }
  const Matrix features = detail::attack_features(preds, cfg);

  MembershipAttackResult result;
  std::vector<double> score_sum(preds.size(), 0.0);
  std::vector<std::size_t> score_count(preds.size(), 0);
  double adv_sum = 0.0;
  std::map<double, double> tpr_sum;
  for (std::size_t r = 0; r < cfg.n_repetitions; ++r) {
    auto rep = detail::worst_case_repetition(features, membership, cfg, cfg.seed + r);
    result.per_repetition_auc.push_back(rep.summary.auc);
    adv_sum += rep.summary.advantage;
    for (const auto& [q, tpr] : rep.summary.tpr_at_fpr) tpr_sum[q] += tpr;
    for (std::size_t i = 0; i < rep.test_records.size(); ++i) {
      score_sum[rep.test_records[i]] += rep.test_scores[i];
      ++score_count[rep.test_records[i]];
    }
  }
  const double reps = static_cast<double>(cfg.n_repetitions);
  double auc_sum = 0.0;
  for (double a : result.per_repetition_auc) auc_sum += a;
  result.summary.auc = auc_sum / reps;
  result.summary.advantage = adv_sum / reps;
  for (const auto& [q, total] : tpr_sum) result.summary.tpr_at_fpr[q] = total / reps;

  for (std::size_t b = 0; b < cfg.n_baseline; ++b) {
    const std::uint64_t seed = cfg.seed + kBaselineSeedOffset + b;
    auto rep = detail::worst_case_repetition(features, detail::shuffled(membership, seed), cfg, seed);
    result.baseline_auc.push_back(rep.summary.auc);
  }
  result.p_value = metrics::empirical_p_value(result.summary.auc, result.baseline_auc);

  for (std::size_t i = 0; i < preds.size(); ++i) {
    RecordScore rs;
    rs.record = i;
    rs.member = membership[i];
    rs.evaluated = score_count[i] > 0;
    rs.score = rs.evaluated ? score_sum[i] / static_cast<double>(score_count[i]) : 0.5;
    result.per_record.push_back(rs);
  }
  return result;
}

/// Positions (into the sorted train+test pool) that shadow model `k`
/// (1-based) trains on.
inline std::vector<std::size_t> lira_shadow_sample(std::size_t pool_size, const LiraConfig& cfg, std::size_t k) {
  Rng rng(cfg.seed + k);
  auto m = static_cast<std::size_t>(std::llround(cfg.shadow_fraction * static_cast<double>(pool_size)));
  m = std::clamp<std::size_t>(m, 1, pool_size - 1);
  auto positions = rng.sample_without_replacement(pool_size, m);
  std::sort(positions.begin(), positions.end());
  return positions;
}

inline std::vector<std::size_t> lira_pool(const Split& s) {
  std::vector<std::size_t> pool(s.train_indices);
  pool.insert(pool.end(), s.test_indices.begin(), s.test_indices.end());
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// Offline LiRA: each pool record's logit-scaled true-label confidence under
/// shadow models that did not train on it is modelled as a Gaussian, and the
/// target's confidence is scored by the Gaussian CDF.
template <ProbabilisticClassifier Target>
MembershipAttackResult run_lira(const Dataset& d, const Split& s, const Target& target,
                                const Hyperparameters& shadow_hyperparameters, const LiraConfig& cfg) {
  cfg.validate();
  if (s.train_indices.size() < 2 || s.test_indices.size() < 2) {
    throw AuditError(ErrorCode::TooFewRecords, "LiRA needs >= 2 train and >= 2 test records");
  }
  const auto pool = lira_pool(s);
  const std::size_t n = pool.size();

  std::vector<std::vector<double>> out_logits(n);
  for (std::size_t k = 1; k <= cfg.n_shadow_models; ++k) {
    const auto positions = lira_shadow_sample(n, cfg, k);
    Split shadow_split;
    shadow_split.seed = cfg.seed + k;
    std::vector<bool> in_shadow(n, false);
    for (auto p : positions) {
      in_shadow[p] = true;
      shadow_split.train_indices.push_back(pool[p]);
    }
    for (std::size_t p = 0; p < n; ++p) {
      if (!in_shadow[p]) shadow_split.test_indices.push_back(pool[p]);
    }
    Hyperparameters h = shadow_hyperparameters;
    h.seed = cfg.seed + k;
    const TrainedModel shadow = fit(h, d, shadow_split);
    for (std::size_t p = 0; p < n; ++p) {
      if (in_shadow[p]) continue;
      const auto i = pool[p];
      out_logits[p].push_back(metrics::logit(shadow.predict_row(d.rows.row(i))[d.labels[i]]));
    }
  }

  std::vector<double> all_out;
  for (const auto& v : out_logits) all_out.insert(all_out.end(), v.begin(), v.end());
  const auto global = metrics::fit_gaussian(all_out, cfg.sigma_floor, cfg.sigma_floor);

  MembershipAttackResult result;
  metrics::ScoredLabels scored;
  for (std::size_t p = 0; p < n; ++p) {
    const auto i = pool[p];
    const double observed = metrics::logit(target.predict_row(d.rows.row(i))[d.labels[i]]);
    RecordScore rs;
    rs.record = i;
    rs.member = std::binary_search(s.train_indices.begin(), s.train_indices.end(), i);
    rs.evaluated = !out_logits[p].empty();
    const auto g = rs.evaluated ? metrics::fit_gaussian(out_logits[p], global.sigma, cfg.sigma_floor) : global;
    rs.score = detail::open_unit(metrics::normal_cdf((observed - g.mu) / g.sigma));
    result.per_record.push_back(rs);
    scored.scores.push_back(rs.score);
    scored.labels.push_back(rs.member);
  }
  result.summary = metrics::summarise(scored, cfg.fpr_levels);

  for (std::size_t b = 0; b < cfg.n_baseline; ++b) {
    metrics::ScoredLabels null_scored{scored.scores, detail::shuffled(scored.labels, cfg.seed + kBaselineSeedOffset + b)};
    result.baseline_auc.push_back(metrics::auc(null_scored));
  }
  result.p_value = metrics::empirical_p_value(result.summary.auc, result.baseline_auc);
  return result;
}

inline MembershipAttackResult run_lira(const Dataset& d, const Split& s, const TrainedModel& target,
                                       const LiraConfig& cfg) {
  return run_lira(d, s, target, cfg.shadow_hyperparameters.value_or(target.hyperparameters), cfg);
}

}  // namespace sdcaudit
