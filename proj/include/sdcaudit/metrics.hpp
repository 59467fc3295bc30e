#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "sdcaudit/error.hpp"

namespace sdcaudit::metrics {

inline constexpr double kDefaultSigmaFloor = 1e-3;
inline constexpr double kLogitClip = 1e-6;

inline const std::vector<double>& default_fpr_levels() {
  static const std::vector<double> levels{0.001, 0.01, 0.1};
  return levels;
}

/// Attack scores (higher = more member-like) with true membership.
struct ScoredLabels {
  std::vector<double> scores;
  std::vector<bool> labels;
};

struct RocSummary {
  double auc = 0.5;
  std::map<double, double> tpr_at_fpr;
  double advantage = 0.0;
};

struct GaussianParams {
  double mu = 0.0;
  double sigma = 1.0;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> count_classes(const ScoredLabels& s) {
  if (s.scores.size() != s.labels.size() || s.scores.empty()) {
    throw AuditError(ErrorCode::DegenerateLabels, "scores and labels must be equal-length and non-empty");
  }
  const auto positives = static_cast<std::size_t>(std::count(s.labels.begin(), s.labels.end(), true));
  const auto negatives = s.labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw AuditError(ErrorCode::DegenerateLabels, "need at least one member and one non-member");
  }
  return {positives, negatives};
}

struct RocPoint {
  double tpr;
  double fpr;
};

/// Staircase ROC from the strictest threshold (+inf, nothing flagged) down to
/// the loosest; records with equal scores change state together.
inline std::vector<RocPoint> roc_points(const ScoredLabels& s) {
  const auto [positives, negatives] = count_classes(s);
  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.scores[a] > s.scores[b]; });
  std::vector<RocPoint> points{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = s.scores[order[i]];
    for (; i < order.size() && s.scores[order[i]] == threshold; ++i) {
      (s.labels[order[i]] ? tp : fp) += 1;
    }
    points.push_back({static_cast<double>(tp) / static_cast<double>(positives),
                      static_cast<double>(fp) / static_cast<double>(negatives)});
  }
  return points;
}

}  // namespace detail

/// Mann-Whitney AUC from mid-ranks: ties earn half credit.
inline double auc(const ScoredLabels& s) {
  const auto [positives, negatives] = detail::count_classes(s);
  const std::size_t n = s.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.scores[a] < s.scores[b]; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (s.labels[order[k]]) positive_rank_sum += mid_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

/// For each level q: the best TPR among operating points with FPR <= q.
inline std::map<double, double> tpr_at_fpr(const ScoredLabels& s, std::span<const double> fpr_levels) {
  const auto points = detail::roc_points(s);
  std::map<double, double> out;
  for (double q : fpr_levels) {
    double best = 0.0;
    for (const auto& p : points) {
      if (p.fpr <= q) best = std::max(best, p.tpr);
    }
    out[q] = best;
  }
  return out;
}

/// max over thresholds of TPR - FPR.
inline double advantage(const ScoredLabels& s) {
  double best = 0.0;
  for (const auto& p : detail::roc_points(s)) best = std::max(best, p.tpr - p.fpr);
  return best;
}

inline RocSummary summarise(const ScoredLabels& s, std::span<const double> fpr_levels = default_fpr_levels()) {
  return {auc(s), tpr_at_fpr(s, fpr_levels), advantage(s)};
}

/// Add-one permutation p-value: (1 + #{b >= observed}) / (1 + |baseline|).
inline double empirical_p_value(double observed, std::span<const double> baseline) {
  const auto at_least = std::count_if(baseline.begin(), baseline.end(), [&](double b) { return b >= observed; });
  return (1.0 + static_cast<double>(at_least)) / (1.0 + static_cast<double>(baseline.size()));
}

inline GaussianParams fit_gaussian(std::span<const double> samples, double fallback_sigma,
                                   double sigma_floor = kDefaultSigmaFloor) {
  if (samples.empty()) {
    throw AuditError(ErrorCode::NoSamples, "cannot fit a Gaussian to zero samples");
  }
  const double n = static_cast<double>(samples.size());
  const double mu = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (samples.size() == 1) return {mu, fallback_sigma};
  double ss = 0.0;
  for (double x : samples) ss += (x - mu) * (x - mu);
  return {mu, std::max(std::sqrt(ss / (n - 1.0)), sigma_floor)};
}

inline double logit(double p) {
  p = std::clamp(p, kLogitClip, 1.0 - kLogitClip);
  return std::log(p / (1.0 - p));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace sdcaudit::metrics
