#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "kslab/limit_law.hpp"
#include "kslab/stats.hpp"

using namespace kslab;

TEST(Moments, Basic) {
  const auto m = moments({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.variance, 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.std_error, std::sqrt(5.0 / 12.0), 1e-15);
  EXPECT_EQ(moments({}).n, 0u);
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
}

TEST(Quantile, TypeSeven) {
  const std::vector<double> s{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 0.0), 1);
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 0.5), 3);
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 1.0), 5);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(sorted_quantile({1, 2, inf}, 0.9), inf);
  EXPECT_DOUBLE_EQ(sorted_quantile({1, 2, inf}, 0.5), 2);
  EXPECT_TRUE(std::isnan(quantile_or_nan({}, 0.5)));
}

TEST(LogLogSlope, Examples) {
  std::vector<std::pair<double, double>> power, constant;
  for (double n : {1e3, 1e4, 1e5, 1e6}) {
    power.emplace_back(n, std::pow(n, 0.6));
    constant.emplace_back(n, 7.0);
  }
  const auto a = fit_loglog_slope(power);
  EXPECT_NEAR(a.slope, 0.6, 1e-12);
  EXPECT_NEAR(a.std_error, 0.0, 1e-10);
  EXPECT_NEAR(fit_loglog_slope(constant).slope, 0.0, 1e-12);
  power[0].second = 0;
  EXPECT_THROW(fit_loglog_slope(power), Error);
  EXPECT_THROW(fit_loglog_slope({{1, 1}, {2, 2}, {3, 3}, {3, 4}}), Error);
}

TEST(KolmogorovSmirnov, Examples) {
  const std::vector<double> a{1, 2, 3, 4};
  EXPECT_EQ(ks_two_sample(a, a).statistic, 0.0);
  EXPECT_NEAR(ks_two_sample(a, a).p_value, 1.0, 1e-12);
  EXPECT_EQ(ks_two_sample(a, {10, 11, 12}).statistic, 1.0);
  EXPECT_THROW(ks_two_sample({}, a), Error);
  EXPECT_NEAR(kolmogorov_q(1.3581), 0.05, 1e-3);
}

TEST(KolmogorovSmirnov, NullSelfTest) {
  // Two independent theta^-2 sample sets: p > 0.01 in at least 95% of repetitions.
  const int reps = 20;
  int ok = 0;
  for (int r = 0; r < reps; ++r) {
    auto a = sample_theta_batch(500, 100 + 2 * r), b = sample_theta_batch(500, 101 + 2 * r);
    for (auto* s : {&a, &b})
      for (double& x : *s) x = kD2Coefficient / (x * x);
    ok += ks_two_sample(a, b).p_value > 0.01;
  }
  EXPECT_GE(ok, 19);
}

TEST(KolmogorovSmirnov, DetectsShift) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n0(0, 1), n1(0.3, 1);
  std::vector<double> a(2000), b(2000);
  for (auto& x : a) x = n0(rng);
  for (auto& x : b) x = n1(rng);
  EXPECT_LT(ks_two_sample(a, b).p_value, 1e-6);
}

TEST(ChiSquare, GoodnessOfFit) {
  const auto r = chi_square_goodness_of_fit({50, 50}, {0.5, 0.5});
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.dof, 1);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
  // X^2 = 4 on 1 dof
  const auto s = chi_square_goodness_of_fit({60, 40}, {0.5, 0.5});
  EXPECT_NEAR(s.statistic, 4.0, 1e-12);
  EXPECT_NEAR(s.p_value, 0.0455003, 1e-6);
  // a tail bin with expectation below 5 is merged into its neighbour
  EXPECT_EQ(chi_square_goodness_of_fit({50, 47, 3}, {0.5, 0.48, 0.02}).dof, 1);
}

TEST(ChiSquare, TwoSample) {
  const auto same = chi_square_two_sample({100, 200, 300}, {100, 200, 300});
  EXPECT_NEAR(same.statistic, 0.0, 1e-12);
  EXPECT_EQ(same.dof, 2);
  const auto scaled = chi_square_two_sample({100, 200, 300}, {200, 400, 600});
  EXPECT_NEAR(scaled.statistic, 0.0, 1e-12);
  EXPECT_LT(chi_square_two_sample({100, 200, 300}, {300, 200, 100}).p_value, 1e-10);
  EXPECT_THROW(chi_square_two_sample({0, 0}, {1, 2}), Error);
}
