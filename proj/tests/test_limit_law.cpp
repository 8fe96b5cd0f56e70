#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "kslab/limit_law.hpp"

using namespace kslab;

TEST(LimitConstants, ClosedForms) {
  EXPECT_NEAR(kD2Coefficient, 4.6023, 1e-4);
  EXPECT_NEAR(kTThetaCoefficient, kD2Coefficient / 2, 1e-12);
  EXPECT_NEAR(kD3Coefficient / std::pow(kD2Coefficient, 1.5), std::sqrt(2 * kE) / 3, 1e-12);
  EXPECT_NEAR(kD4Coefficient / std::pow(kD2Coefficient, 2), kE / 6, 1e-12);
  EXPECT_DOUBLE_EQ(kD5Rate, 9.6);
}

TEST(LimitVector, DeterministicTransforms) {
  Rng rng = make_rng(1);
  for (double theta : {0.3, 1.0, 2.7}) {
    const auto lv = limit_vector_from_theta(theta, rng);
    EXPECT_NEAR(lv.d2 * theta * theta, kD2Coefficient, 1e-12);
    EXPECT_NEAR(lv.d3 * std::pow(theta, 3), kD3Coefficient, 1e-12);
    EXPECT_NEAR(lv.d4 * std::pow(theta, 4), kD4Coefficient, 1e-12);
    EXPECT_NEAR(lv.t_theta, lv.d2 / 2, 1e-12);
  }
  EXPECT_THROW(limit_vector_from_theta(0.0, rng), Error);
  EXPECT_THROW(limit_vector_from_theta(INFINITY, rng), Error);
}

TEST(LimitVector, D5MeanAtThetaOne) {
  Rng rng = make_rng(2);
  double sum = 0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) sum += double(limit_vector_from_theta(1.0, rng).d5);
  EXPECT_NEAR(sum / draws, 9.6, 4 * std::sqrt(9.6 / draws));
}

TEST(Theta, AboveStartTime) {
  Rng rng = make_rng(3);
  for (int i = 0; i < 500; ++i) EXPECT_GT(try_sample_theta(rng).value_or(INFINITY), 0.05);
}

TEST(Theta, Reproducible) {
  Rng a = make_rng(4), b = make_rng(4);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_theta(a), sample_theta(b));
}

TEST(Theta, CensoringIsRareButReal) {
  // P(theta > T) decays like T^{-1/2}, so a few samples in a thousand reach the cap.
  const auto s = sample_theta_batch(2000, 31);
  const auto censored = std::count_if(s.begin(), s.end(), [](double x) { return std::isinf(x); });
  EXPECT_LT(censored, 30);
}

TEST(Theta, Validation) {
  Rng rng = make_rng(5);
  ThetaOptions o;
  o.dt = 2e-3;
  EXPECT_THROW(sample_theta(rng, o), Error);
  o.dt = 1e-4;
  o.barrier_scale = 0;
  EXPECT_THROW(sample_theta(rng, o), Error);
  o.barrier_scale = 1;
  o.t_cap = 0.06;
  std::size_t censored = 0;
  for (int i = 0; i < 50; ++i) censored += try_sample_theta(rng, o).has_value() ? 0 : 1;
  EXPECT_EQ(censored, 50u);
  EXPECT_THROW(sample_theta(rng, o), Error);
}

TEST(Theta, ReflectionIsPathwiseIdentical) {
  ThetaOptions plus, minus;
  minus.reflected = true;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng a = make_rng(seed), b = make_rng(seed);
    EXPECT_EQ(try_sample_theta(a, plus), try_sample_theta(b, minus));
  }
}

TEST(Theta, HigherBarrierIsHitLater) {
  ThetaOptions low, high;
  high.barrier_scale = 2;
  low.bridge = high.bridge = BridgeMode::kOff;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Rng a = make_rng(seed), b = make_rng(seed);
    const auto t1 = try_sample_theta(a, low), t2 = try_sample_theta(b, high);
    if (t1 && t2) { EXPECT_GE(*t2, *t1); }
    if (!t1) { EXPECT_FALSE(t2.has_value()); }
  }
}

TEST(Theta, BatchIndependentOfThreads) {
  const auto a = sample_theta_batch(64, 7, {}, 1);
  const auto b = sample_theta_batch(64, 7, {}, 4);
  EXPECT_EQ(a, b);
}

TEST(Theta, MedianStableUnderStepRefinement) {
  ThetaOptions coarse, fine;
  coarse.dt = 2e-4;
  fine.dt = 1e-4;
  auto a = sample_theta_batch(4000, 11, coarse), b = sample_theta_batch(4000, 12, fine);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  Rng rng = make_rng(13);
  const auto ta = quantile_table(a, rng), tb = quantile_table(b, rng);
  const double se = std::hypot(ta.std_errors[3], tb.std_errors[3]);
  EXPECT_LT(std::abs(ta.values[3] - tb.values[3]), 3 * se);
}

TEST(Theta, FrozenMedian) {
  // reference median of theta at dt = 1e-4
  auto s = sample_theta_batch(5000, 21);
  std::sort(s.begin(), s.end());
  EXPECT_NEAR(sorted_quantile(s, 0.5), 1.567, 0.05);
}

TEST(QuantileTable, IncreasingAndAboveStart) {
  Rng rng = make_rng(14);
  const auto t = theta_quantiles(2000, 1e-4, rng);
  EXPECT_EQ(t.n_samples, 2000u);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    EXPECT_GT(t.values[i], 0.05);
    if (i) { EXPECT_GT(t.values[i], t.values[i - 1]); }
    EXPECT_GE(t.std_errors[i], 0);
  }
  EXPECT_THROW(theta_quantiles(999, 1e-4, rng), Error);
}

TEST(QuantileTable, ReproducibleAcrossSeeds) {
  Rng r1 = make_rng(15), r2 = make_rng(16);
  const auto a = theta_quantiles(4000, 1e-4, r1), b = theta_quantiles(4000, 1e-4, r2);
  for (std::size_t i = 1; i + 1 < a.values.size(); ++i) {
    EXPECT_LT(std::abs(a.values[i] - b.values[i]), 3.5 * std::hypot(a.std_errors[i], b.std_errors[i])) << i;
  }
}
