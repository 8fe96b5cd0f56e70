#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "kslab/errors.hpp"
#include "kslab/fluid.hpp"
#include "kslab/parallel.hpp"
#include "kslab/rng.hpp"
#include "kslab/stats.hpp"

namespace kslab {

// Limit constants of the critical core composition, as functions of theta.
inline const double kD2Coefficient = std::pow(2.0, 9.0 / 5) * std::pow(3.0, 4.0 / 5) * std::exp(-3.0 / 5);
inline const double kD3Coefficient = std::pow(2.0, 16.0 / 5) * std::pow(3.0, 1.0 / 5) * std::exp(-2.0 / 5);
inline const double kD4Coefficient = std::pow(2.0, 13.0 / 5) * std::pow(3.0, 3.0 / 5) * std::exp(-1.0 / 5);
inline constexpr double kD5Rate = 48.0 / 5.0;
inline const double kTThetaCoefficient = std::pow(6.0, 4.0 / 5) * std::exp(-3.0 / 5);

enum class BridgeMode { kAuto, kOn, kOff };

struct ThetaOptions {
  double dt = 1e-4;
  /// kAuto enables the crossing correction for dt > 1e-5.
  BridgeMode bridge = BridgeMode::kAuto;
  /// Hit -c t^-2 with negated noise instead of +c t^-2. Pathwise identical.
  bool reflected = false;
  double barrier_scale = 1.0;
  double t0 = 0.05;
  double t_cap = 1e4;
};

/// First passage of a standard Brownian motion W to c t^-2.
///
/// The grid step at time t is dt max(1, t)^{3/2}: the barrier is nearly flat
/// for t > 1 and W moves on scale sqrt(t), so a relative step keeps the
/// resolution of the hitting time useful while bounding the work for the
/// heavy right tail. The step schedule is deterministic, so two calls fed the
/// same stream see the same path. With the bridge test a crossing inside a
/// step is detected with the exact Brownian-bridge probability against the
/// chord of the barrier and reported at the step midpoint.
/// Returns nullopt when the path has not hit by t_cap.
inline std::optional<double> try_sample_theta(Rng& rng, const ThetaOptions& options = {}) {
  require(options.dt > 0 && options.dt <= 1e-3, ErrorCode::kInvalidArgument, "dt must lie in (0, 1e-3]");
  require(options.barrier_scale > 0, ErrorCode::kInvalidArgument, "barrier scale must be positive");
  const bool bridge = options.bridge == BridgeMode::kOn || (options.bridge == BridgeMode::kAuto && options.dt > 1e-5);
  const double sign = options.reflected ? -1.0 : 1.0;
  const double c = options.barrier_scale;
  std::normal_distribution<double> normal(0.0, 1.0);

  double t = options.t0;
  double w = sign * std::sqrt(t) * normal(rng);
  double gap = c / (t * t) - sign * w;
  if (gap <= 0) return t;
  while (t < options.t_cap) {
    const double h = options.dt * (t > 1 ? t * std::sqrt(t) : 1.0);
    const double t1 = t + h;
    w += sign * std::sqrt(h) * normal(rng);
    const double gap1 = c / (t1 * t1) - sign * w;
    if (gap1 <= 0) return bridge ? t + 0.5 * h : t1;
    if (bridge && uniform01(rng) < std::exp(-2.0 * gap * gap1 / h)) return t + 0.5 * h;
    t = t1;
    gap = gap1;
  }
  return std::nullopt;
}

inline double sample_theta(Rng& rng, const ThetaOptions& options = {}) {
  const auto theta = try_sample_theta(rng, options);
  if (!theta) throw Error(ErrorCode::kTimeCapExceeded, "no barrier crossing before t = " + std::to_string(options.t_cap));
  return *theta;
}

struct LimitVector {
  double theta = 0;
  double d2 = 0;
  double d3 = 0;
  double d4 = 0;
  std::uint64_t d5 = 0;
  double t_theta = 0;
};

inline LimitVector limit_vector_from_theta(double theta, Rng& rng) {
  require(theta > 0 && std::isfinite(theta), ErrorCode::kInvalidArgument, "theta must be positive and finite");
  LimitVector out;
  out.theta = theta;
  const double inv = 1.0 / theta;
  out.d2 = kD2Coefficient * inv * inv;
  out.d3 = kD3Coefficient * inv * inv * inv;
  out.d4 = kD4Coefficient * std::pow(inv, 4);
  out.t_theta = kTThetaCoefficient * inv * inv;
  const double rate = kD5Rate * std::pow(inv, 5);
  out.d5 = rate > 0 ? std::poisson_distribution<std::uint64_t>(rate)(rng) : 0;
  return out;
}

inline LimitVector sample_limit_vector(Rng& rng, const ThetaOptions& options = {}) {
  const double theta = sample_theta(rng, options);
  return limit_vector_from_theta(theta, rng);
}

/// Independent theta draws, sample i from its own derived stream. Censored
/// draws are +infinity. Independent of thread count.
inline std::vector<double> sample_theta_batch(std::size_t count, std::uint64_t seed, const ThetaOptions& options = {},
                                              unsigned threads = default_threads()) {
  std::vector<double> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    Rng rng = make_rng(derive_seed(seed, {0x7468657461ULL, i}));
    out[i] = try_sample_theta(rng, options).value_or(std::numeric_limits<double>::infinity());
  });
  return out;
}

inline constexpr std::array<double, 7> kThetaQuantileLevels = {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};

struct QuantileTable {
  std::array<double, 7> levels = kThetaQuantileLevels;
  std::array<double, 7> values{};
  std::array<double, 7> std_errors{};
  std::size_t n_samples = 0;
  std::size_t n_censored = 0;
};

/// Quantiles with bootstrap standard errors.
inline QuantileTable quantile_table(std::vector<double> samples, Rng& rng, std::size_t bootstrap = 200) {
  require(!samples.empty(), ErrorCode::kInsufficientData, "no samples");
  QuantileTable table;
  table.n_samples = samples.size();
  table.n_censored = static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [](double x) { return std::isinf(x); }));
  std::sort(samples.begin(), samples.end());
  for (std::size_t q = 0; q < table.levels.size(); ++q) table.values[q] = sorted_quantile(samples, table.levels[q]);
  std::vector<std::array<double, 7>> boot(bootstrap);
  std::vector<double> resample(samples.size());
  for (auto& b : boot) {
    for (auto& x : resample) x = samples[uniform_index(rng, samples.size())];
    std::sort(resample.begin(), resample.end());
    for (std::size_t q = 0; q < table.levels.size(); ++q) b[q] = sorted_quantile(resample, table.levels[q]);
  }
  for (std::size_t q = 0; q < table.levels.size(); ++q) {
    // a censored (infinite) quantile in any replicate has no finite spread
    if (std::any_of(boot.begin(), boot.end(), [&](const auto& b) { return std::isinf(b[q]); })) {
      table.std_errors[q] = std::numeric_limits<double>::infinity();
      continue;
    }
    double mean = 0, sq = 0;
    for (const auto& b : boot) mean += b[q];
    mean /= static_cast<double>(bootstrap);
    for (const auto& b : boot) sq += (b[q] - mean) * (b[q] - mean);
    table.std_errors[q] = bootstrap > 1 ? std::sqrt(sq / static_cast<double>(bootstrap - 1)) : 0.0;
  }
  return table;
}

inline QuantileTable theta_quantiles(std::size_t n_samples, double dt, Rng& rng, const ThetaOptions& base = {},
                                     unsigned threads = default_threads()) {
  require(n_samples >= 1000, ErrorCode::kInsufficientData, "theta_quantiles needs at least 1000 samples");
  ThetaOptions options = base;
  options.dt = dt;
  const std::uint64_t seed = rng();
  return quantile_table(sample_theta_batch(n_samples, seed, options, threads), rng);
}

}  // namespace kslab
