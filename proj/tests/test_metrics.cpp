#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace sdcaudit;
using metrics::ScoredLabels;
using oracles::brute_auc;
using oracles::random_instance;

namespace {

/// Every threshold t: flag score >= t, plus flag nothing.
std::vector<std::pair<double, double>> brute_roc(const ScoredLabels& s) {
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  const double p = static_cast<double>(std::count(s.labels.begin(), s.labels.end(), true));
  const double n = static_cast<double>(s.labels.size()) - p;
  for (double t : s.scores) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      if (s.scores[i] >= t) (s.labels[i] ? tp : fp) += 1;
    }
    pts.emplace_back(tp / p, fp / n);
  }
  return pts;
}

}  // namespace

TEST(Auc, Examples) {
  EXPECT_EQ(metrics::auc({{0.9, 0.8, 0.2, 0.1}, {true, true, false, false}}), 1.0);
  EXPECT_EQ(metrics::auc({{0.3, 0.3, 0.3, 0.3}, {true, false, true, false}}), 0.5);
  EXPECT_EQ(metrics::auc({{0.9, 0.4, 0.6, 0.1}, {true, false, false, true}}), 0.5);
}

TEST(Auc, DegenerateLabels) {
  EXPECT_THROW(metrics::auc({{0.1, 0.2}, {true, true}}), AuditError);
  EXPECT_THROW(metrics::auc({{}, {}}), AuditError);
  EXPECT_THROW(metrics::tpr_at_fpr({{0.1}, {false}}, metrics::default_fpr_levels()), AuditError);
}

TEST(Auc, MatchesPairwiseCounting) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_instance(rng);
    EXPECT_NEAR(metrics::auc(s), brute_auc(s), 1e-9);
  }
}

TEST(Auc, InvariantUnderStrictlyIncreasingTransforms) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_instance(rng);
    const double base = metrics::auc(s);
    auto t = s;
    for (auto& v : t.scores) v = std::exp(3.0 * v) - 7.0;
    EXPECT_NEAR(metrics::auc(t), base, 1e-9);
    for (auto& v : t.scores) v = std::atan(v);
    EXPECT_NEAR(metrics::auc(t), base, 1e-9);
  }
}

TEST(Auc, ComplementSumsToOne) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_instance(rng);
    auto flipped = s;
    for (std::size_t i = 0; i < s.labels.size(); ++i) flipped.labels[i] = !s.labels[i];
    EXPECT_NEAR(metrics::auc(s) + metrics::auc(flipped), 1.0, 1e-9);
  }
}

TEST(TprAtFpr, Examples) {
  const std::vector<double> zero{0.0}, one{1.0};
  EXPECT_EQ(metrics::tpr_at_fpr({{0.9, 0.8, 0.2, 0.1}, {true, true, false, false}}, zero).at(0.0), 1.0);
  EXPECT_EQ(metrics::tpr_at_fpr({{0.9, 0.85, 0.8, 0.1}, {true, false, true, false}}, zero).at(0.0), 0.5);
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) EXPECT_EQ(metrics::tpr_at_fpr(random_instance(rng), one).at(1.0), 1.0);
}

TEST(TprAtFpr, TiesMoveTogether) {
  // A member tied with a non-member cannot be flagged without that false positive.
  EXPECT_EQ(metrics::tpr_at_fpr({{0.7, 0.7, 0.1}, {true, false, false}}, std::vector<double>{0.0}).at(0.0), 0.0);
  EXPECT_EQ(metrics::tpr_at_fpr({{0.7, 0.7, 0.1}, {true, false, false}}, std::vector<double>{0.5}).at(0.5), 1.0);
}

TEST(TprAtFpr, MatchesBruteForceAndIsMonotone) {
  Rng rng(5);
  std::vector<double> levels;
  for (int k = 0; k <= 40; ++k) levels.push_back(k / 40.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_instance(rng, 60);
    const auto got = metrics::tpr_at_fpr(s, levels);
    const auto roc = brute_roc(s);
    double previous = -1.0;
    for (double q : levels) {
      double expected = 0.0;
      for (const auto& [tpr, fpr] : roc) {
        if (fpr <= q) expected = std::max(expected, tpr);
      }
      EXPECT_DOUBLE_EQ(got.at(q), expected);
      EXPECT_GE(got.at(q), previous);
      previous = got.at(q);
    }
  }
}

TEST(Advantage, IsTheLargestTprMinusFpr) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_instance(rng, 60);
    double expected = 0.0;
    for (const auto& [tpr, fpr] : brute_roc(s)) expected = std::max(expected, tpr - fpr);
    EXPECT_NEAR(metrics::advantage(s), expected, 1e-12);
  }
  EXPECT_EQ(metrics::advantage({{0.9, 0.8, 0.2, 0.1}, {true, true, false, false}}), 1.0);
}

TEST(PValue, Examples) {
  EXPECT_DOUBLE_EQ(metrics::empirical_p_value(0.9, std::vector<double>{0.5, 0.51, 0.49}), 0.25);
  EXPECT_DOUBLE_EQ(metrics::empirical_p_value(0.1, std::vector<double>(9, 0.5)), 1.0);
  EXPECT_DOUBLE_EQ(metrics::empirical_p_value(0.9, std::vector<double>(19, 0.5)), 0.05);
  // Equality counts as "at least as extreme".
  EXPECT_DOUBLE_EQ(metrics::empirical_p_value(0.5, std::vector<double>{0.5, 0.4, 0.4}), 0.5);
}

TEST(Gaussian, Examples) {
  const auto a = metrics::fit_gaussian(std::vector<double>{0.0, 2.0}, 9.0);
  EXPECT_DOUBLE_EQ(a.mu, 1.0);
  EXPECT_NEAR(a.sigma, std::sqrt(2.0), 1e-15);
  const auto b = metrics::fit_gaussian(std::vector<double>{5, 5, 5}, 9.0);
  EXPECT_EQ(b.mu, 5.0);
  EXPECT_EQ(b.sigma, metrics::kDefaultSigmaFloor);
  const auto c = metrics::fit_gaussian(std::vector<double>{3.0}, 1.2);
  EXPECT_EQ(c.mu, 3.0);
  EXPECT_EQ(c.sigma, 1.2);
  try {
    metrics::fit_gaussian(std::vector<double>{}, 1.0);
    FAIL();
  } catch (const AuditError& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoSamples);
  }
}

TEST(Gaussian, TranslationAndScaleEquivariance) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(2 + rng.uniform_index(30));
    for (auto& v : x) v = 10.0 * rng.uniform01() - 5.0;
    const double shift = 100.0 * rng.uniform01() - 50.0, scale = 0.5 + 4.0 * rng.uniform01();
    const auto base = metrics::fit_gaussian(x, 1.0);
    auto moved = x;
    for (auto& v : moved) v = scale * v + shift;
    const auto g = metrics::fit_gaussian(moved, 1.0);
    EXPECT_NEAR(g.mu, scale * base.mu + shift, 1e-9);
    EXPECT_NEAR(g.sigma, scale * base.sigma, 1e-9);
  }
}

TEST(Logit, Examples) {
  EXPECT_EQ(metrics::logit(0.5), 0.0);
  EXPECT_NEAR(metrics::logit(0.9), std::log(9.0), 1e-12);
  EXPECT_NEAR(metrics::logit(1.0), 13.81551, 1e-5);
  // 1 - 1e-6 is not exact in binary; 1 - p then carries ~1e-10 relative error.
  EXPECT_NEAR(metrics::logit(1.0), std::log((1 - 1e-6) / 1e-6), 1e-9);
  EXPECT_NEAR(metrics::logit(0.0), -std::log((1 - 1e-6) / 1e-6), 1e-9);
  EXPECT_EQ(metrics::logit(1.0), metrics::logit(1.0 - 1e-6));
  EXPECT_EQ(metrics::logit(-3.0), metrics::logit(1e-6));
}

TEST(NormalCdf, ReferenceValuesAndSymmetry) {
  // Reference values of the standard normal CDF to 16 significant digits.
  EXPECT_EQ(metrics::normal_cdf(0.0), 0.5);
  EXPECT_NEAR(metrics::normal_cdf(1.0), 0.8413447460685429, 1e-12);
  EXPECT_NEAR(metrics::normal_cdf(-2.0), 0.02275013194817921, 1e-12);
  EXPECT_NEAR(metrics::normal_cdf(3.0), 0.9986501019683699, 1e-12);
  EXPECT_NEAR(metrics::normal_cdf(-6.0), 9.865876450376982e-10, 1e-12);
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const double z = 16.0 * rng.uniform01() - 8.0;
    EXPECT_NEAR(metrics::normal_cdf(-z), 1.0 - metrics::normal_cdf(z), 1e-12);
  }
}
