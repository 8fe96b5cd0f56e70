#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kslab/fluid.hpp"
#include "kslab/graph.hpp"
#include "kslab/lab.hpp"
#include "kslab/limit_law.hpp"
#include "kslab/oracles.hpp"
#include "kslab/peeler.hpp"
#include "kslab/samplers.hpp"
#include "kslab/stats.hpp"

namespace kslab::acceptance {

/// Bumped whenever a size or threshold below changes.
inline constexpr int kTierTableVersion = 1;

struct Tier {
  std::string name;
  std::uint64_t seed = 20240601;

  // extinction time, fluid tracking, drift/variance: one critical dataset
  std::uint64_t big_n = 0;
  std::uint64_t big_trials = 0;
  double extinction_tolerance = 0;
  std::uint64_t tracking_trials = 0;
  double tracking_fraction = 0.9;
  double tracking_tolerance = 0;
  std::uint64_t drift_traces = 0;
  double drift_eps = 0.05;
  double variance_tolerance = 0;
  double drift_sigmas = 2;

  // scaling exponents
  int ladder_min_exp = 0;
  int ladder_max_exp = 0;
  std::uint64_t ladder_trials = 0;
  double slope_tolerance = 0;

  // limit-law checks at the top of the ladder
  std::uint64_t ratio_trials = 0;
  double ratio_tolerance = 0;
  std::uint64_t distribution_trials = 0;
  std::uint64_t theta_samples = 0;
  double theta_dt = 1e-4;
  double ks_max_statistic = 0;
  std::uint64_t tail_trials = 0;
  double d6_max_mean = 0;
  double d5_relative_tolerance = 0;

  // phase transition
  std::uint64_t phase_n = 0;
  std::uint64_t phase_trials = 0;
  std::vector<double> phase_lambdas;
  double phase_subcritical_max = 0;
  double phase_supercritical_min = 0;

  // deterministic fluid checks
  double ode_step = 1e-5;
  double ode_gap = 0.01;
  double ode_tolerance = 1e-6;
  std::size_t solver_points = 10000;
  double solver_tolerance = 1e-12;
  double small_z_tolerance = 1e-3;
  std::vector<double> gradient_eps;

  // composition of G(0, v, s)
  std::uint64_t composition_v = 0;
  std::uint64_t composition_trials = 0;

  // simplicity
  std::uint64_t simplicity_v = 0;
  std::uint64_t simplicity_trials = 0;
  double simplicity_tolerance = 0;

  // combinatorial oracles
  std::uint64_t abelian_graphs = 0;
  int abelian_max_n = 30;
  int exhaustive_max_n = 0;
  int corpus_max_n = 0;
  std::uint64_t corpus_graphs_per_n = 0;
  std::uint64_t random_graphs = 0;
  int random_max_n = 12;

  // multigraph versus simple
  std::uint64_t transfer_n = 0;
  std::uint64_t transfer_trials = 0;
  double transfer_min_p = 0.01;
};

/// Full tier: the sizes and tolerances of the acceptance criteria.
inline Tier full_tier() {
  Tier t;
  t.name = "full";
  t.big_n = 1'000'000;
  t.big_trials = 100;
  t.extinction_tolerance = 0.005;
  t.tracking_trials = 20;
  t.tracking_tolerance = 0.005;
  t.drift_traces = 50;
  t.variance_tolerance = 0.15;
  t.ladder_min_exp = 14;
  t.ladder_max_exp = 20;
  t.ladder_trials = 200;
  t.slope_tolerance = 0.06;
  t.ratio_trials = 200;
  t.ratio_tolerance = 0.15;
  t.distribution_trials = 500;
  t.theta_samples = 10'000;
  t.ks_max_statistic = 0.15;
  t.tail_trials = 500;
  t.d6_max_mean = 0.2;
  t.d5_relative_tolerance = 0.30;
  t.phase_n = 100'000;
  t.phase_trials = 20;
  t.phase_lambdas = {2.0, 2.5, kE, 3.0, 3.5};
  t.phase_subcritical_max = 0.01;
  t.phase_supercritical_min = 0.03;
  t.gradient_eps = {1e-2, 1e-3};
  t.composition_v = 1'000'000;
  t.composition_trials = 500;
  t.simplicity_v = 10'000;
  t.simplicity_trials = 100'000;
  t.simplicity_tolerance = 0.01;
  t.abelian_graphs = 1000;
  t.exhaustive_max_n = 7;
  t.corpus_max_n = 10;
  t.corpus_graphs_per_n = 20'000;
  t.random_graphs = 10'000;
  t.transfer_n = 100'000;
  t.transfer_trials = 500;
  return t;
}

/// Quick tier: the same checks at CI sizes. Tolerances that are finite-size
/// effects are rescaled by their n-dependence (extinction shift ~ n^{-2/5},
/// tracking error ~ n^{-1/2}); the others are unchanged.
inline Tier quick_tier() {
  Tier t = full_tier();
  t.name = "quick";
  t.big_n = 100'000;
  t.big_trials = 30;
  t.extinction_tolerance = 0.005 * std::pow(10.0, 0.4);
  t.tracking_trials = 10;
  t.tracking_tolerance = 0.005 * std::sqrt(10.0);
  t.drift_traces = 30;
  t.ladder_min_exp = 13;
  t.ladder_max_exp = 18;
  t.ladder_trials = 100;
  t.slope_tolerance = 0.1;
  t.ratio_trials = 200;
  t.distribution_trials = 200;
  t.theta_samples = 4000;
  t.ks_max_statistic = 0.2;
  t.tail_trials = 200;
  t.phase_n = 100'000;
  t.phase_trials = 10;
  t.composition_v = 1'000'000;
  t.composition_trials = 100;
  t.simplicity_v = 1000;
  t.simplicity_trials = 20'000;
  t.abelian_graphs = 200;
  t.exhaustive_max_n = 6;
  t.corpus_max_n = 8;
  t.corpus_graphs_per_n = 2000;
  t.random_graphs = 2000;
  t.transfer_n = 20'000;
  t.transfer_trials = 150;
  return t;
}

inline Tier tier_by_name(const std::string& name) {
  if (name == "full") return full_tier();
  if (name == "quick") return quick_tier();
  throw Error(ErrorCode::kUsage, "unknown tier '" + name + "'");
}

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

inline constexpr int kCriterionCount = 15;

inline std::string criterion_name(int id) {
  static const char* names[] = {"",
                                "extinction-time",
                                "scaling-exponents",
                                "limit-law-ratios",
                                "d2-distribution",
                                "d5-and-tail",
                                "phase-transition",
                                "fluid-tracking",
                                "ode-cross-check",
                                "solver-contracts",
                                "gradient-windows",
                                "drift-variance",
                                "core-composition",
                                "simplicity",
                                "combinatorial-oracles",
                                "multigraph-simple-transfer"};
  return id >= 1 && id <= kCriterionCount ? names[id] : "unknown";
}

namespace detail {

inline std::string fmt(double x, int precision = 4) {
  std::ostringstream out;
  out << std::setprecision(precision) << x;
  return out.str();
}

}  // namespace detail

/// Lazily built datasets shared between criteria.
class Context {
 public:
  Context(Tier tier, unsigned threads) : tier_(std::move(tier)), threads_(threads) {}

  const Tier& tier() const { return tier_; }
  unsigned threads() const { return threads_; }

  ExperimentConfig base_config(std::uint64_t salt) const {
    ExperimentConfig c;
    c.master_seed = derive_seed(tier_.seed, {salt});
    c.threads = threads_;
    return c;
  }

  /// Critical runs at big_n with fluctuation summaries; the first
  /// drift_traces trials also keep their full traces.
  const std::vector<TrialResult>& big() {
    if (!big_) {
      auto c = base_config(1);
      c.n_values = {tier_.big_n};
      c.n_trials = std::max({tier_.big_trials, tier_.tracking_trials, tier_.drift_traces});
      c.record_fluctuations = true;
      traces_.assign(tier_.drift_traces, KsTrace{});
      big_ = run_critical_experiment(c, [&](std::size_t i, const TrialResult&, const KsTrace& tr) {
        if (i < traces_.size()) traces_[i] = tr;
      });
    }
    return *big_;
  }

  const std::vector<KsTrace>& big_traces() {
    big();
    return traces_;
  }

  /// Critical runs at n = 2^ladder_max_exp.
  const std::vector<TrialResult>& top() {
    if (!top_) {
      auto c = base_config(2);
      c.n_values = {std::uint64_t{1} << tier_.ladder_max_exp};
      c.n_trials = std::max({tier_.ratio_trials, tier_.distribution_trials, tier_.tail_trials, tier_.ladder_trials});
      top_ = run_critical_experiment(c);
    }
    return *top_;
  }

  /// Mean D2, D3, D4 per ladder n; the top rung reuses the first trials of top().
  const std::map<std::uint64_t, std::vector<TrialResult>>& ladder() {
    if (!ladder_) {
      ladder_.emplace();
      auto c = base_config(2);
      for (int e = tier_.ladder_min_exp; e < tier_.ladder_max_exp; ++e) c.n_values.push_back(std::uint64_t{1} << e);
      c.n_trials = tier_.ladder_trials;
      for (auto& r : run_critical_experiment(c)) (*ladder_)[r.n].push_back(r);
      const auto& t = top();
      (*ladder_)[std::uint64_t{1} << tier_.ladder_max_exp].assign(t.begin(),
                                                                   t.begin() + static_cast<std::ptrdiff_t>(tier_.ladder_trials));
    }
    return *ladder_;
  }

  const std::vector<double>& theta() {
    if (!theta_) {
      ThetaOptions o;
      o.dt = tier_.theta_dt;
      theta_ = sample_theta_batch(tier_.theta_samples, derive_seed(tier_.seed, {3}), o, threads_);
    }
    return *theta_;
  }

 private:
  Tier tier_;
  unsigned threads_;
  std::optional<std::vector<TrialResult>> big_, top_;
  std::vector<KsTrace> traces_;
  std::optional<std::map<std::uint64_t, std::vector<TrialResult>>> ladder_;
  std::optional<std::vector<double>> theta_;
};

inline CriterionResult extinction_time(Context& ctx) {
  const auto& t = ctx.tier();
  std::vector<double> ratios;
  for (std::size_t i = 0; i < t.big_trials; ++i) {
    ratios.push_back(static_cast<double>(ctx.big()[i].extinction_step) / static_cast<double>(t.big_n));
  }
  const auto m = moments(ratios);
  const double shift = m.mean - kTStar;
  return {1, "", std::abs(shift) < t.extinction_tolerance,
          "mean theta/n = " + detail::fmt(m.mean, 6) + " (se " + detail::fmt(m.std_error, 2) + "), t* = " +
              detail::fmt(kTStar, 6) + ", |shift| = " + detail::fmt(std::abs(shift), 3) + " vs tolerance " +
              detail::fmt(t.extinction_tolerance, 3) + " over " + std::to_string(t.big_trials) + " trials at n = " +
              std::to_string(t.big_n)};
}

inline CriterionResult scaling_exponents(Context& ctx) {
  const auto& t = ctx.tier();
  std::vector<std::pair<double, double>> d2, d3, d4;
  for (const auto& [n, rs] : ctx.ladder()) {
    double s2 = 0, s3 = 0, s4 = 0;
    for (const auto& r : rs) {
      s2 += static_cast<double>(r.core.count(2));
      s3 += static_cast<double>(r.core.count(3));
      s4 += static_cast<double>(r.core.count(4));
    }
    const double k = static_cast<double>(rs.size());
    d2.emplace_back(static_cast<double>(n), s2 / k);
    d3.emplace_back(static_cast<double>(n), s3 / k);
    d4.emplace_back(static_cast<double>(n), s4 / k);
  }
  const auto f2 = fit_loglog_slope(d2), f3 = fit_loglog_slope(d3), f4 = fit_loglog_slope(d4);
  const bool pass = std::abs(f2.slope - 0.6) <= t.slope_tolerance && std::abs(f3.slope - 0.4) <= t.slope_tolerance &&
                    std::abs(f4.slope - 0.2) <= t.slope_tolerance;
  return {2, "", pass,
          "slopes D2 " + detail::fmt(f2.slope) + " (se " + detail::fmt(f2.std_error, 2) + "), D3 " +
              detail::fmt(f3.slope) + " (se " + detail::fmt(f3.std_error, 2) + "), D4 " + detail::fmt(f4.slope) +
              " (se " + detail::fmt(f4.std_error, 2) + "); targets 0.6/0.4/0.2 +- " +
              detail::fmt(t.slope_tolerance, 2) + ", n = 2^" + std::to_string(t.ladder_min_exp) + "..2^" +
              std::to_string(t.ladder_max_exp) + ", " + std::to_string(t.ladder_trials) + " trials each"};
}

inline CriterionResult limit_law_ratios(Context& ctx) {
  const auto& t = ctx.tier();
  const double n = static_cast<double>(std::uint64_t{1} << t.ladder_max_exp);
  const double target3 = kD3Coefficient / std::pow(kD2Coefficient, 1.5);
  const double target4 = kD4Coefficient / (kD2Coefficient * kD2Coefficient);
  std::vector<double> r3, r4;
  std::size_t empty = 0;
  for (std::size_t i = 0; i < t.ratio_trials; ++i) {
    const auto& r = ctx.top()[i];
    const double d2 = static_cast<double>(r.core.count(2)) * std::pow(n, -0.6);
    if (d2 <= 0) {
      ++empty;
      continue;
    }
    r3.push_back(static_cast<double>(r.core.count(3)) * std::pow(n, -0.4) / std::pow(d2, 1.5));
    r4.push_back(static_cast<double>(r.core.count(4)) * std::pow(n, -0.2) / (d2 * d2));
  }
  if (r3.empty()) return {3, "", false, "every core was empty"};
  const double m3 = median(r3), m4 = median(r4);
  const double e3 = m3 / target3 - 1, e4 = m4 / target4 - 1;
  const bool pass = std::abs(e3) <= t.ratio_tolerance && std::abs(e4) <= t.ratio_tolerance;
  return {3, "", pass,
          "median (n^-2/5 D3)/(n^-3/5 D2)^1.5 = " + detail::fmt(m3) + " vs " + detail::fmt(target3) + " (" +
              detail::fmt(100 * e3, 3) + "%), median (n^-1/5 D4)/(n^-3/5 D2)^2 = " + detail::fmt(m4) + " vs " +
              detail::fmt(target4) + " (" + detail::fmt(100 * e4, 3) + "%), tolerance " +
              detail::fmt(100 * t.ratio_tolerance, 3) + "%, " + std::to_string(r3.size()) + " trials, " +
              std::to_string(empty) + " empty cores"};
}

inline CriterionResult d2_distribution(Context& ctx) {
  const auto& t = ctx.tier();
  const double n = static_cast<double>(std::uint64_t{1} << t.ladder_max_exp);
  std::vector<double> empirical, limit;
  for (std::size_t i = 0; i < t.distribution_trials; ++i) {
    empirical.push_back(static_cast<double>(ctx.top()[i].core.count(2)) * std::pow(n, -0.6));
  }
  std::size_t censored = 0;
  for (double th : ctx.theta()) {
    if (std::isinf(th)) ++censored;
    limit.push_back(std::isinf(th) ? 0.0 : kD2Coefficient / (th * th));
  }
  const auto ks = ks_two_sample(empirical, limit);
  return {4, "", ks.statistic < t.ks_max_statistic,
          "KS statistic " + detail::fmt(ks.statistic) + " (p " + detail::fmt(ks.p_value, 3) + ") vs limit " +
              detail::fmt(t.ks_max_statistic, 3) + "; mean n^-3/5 D2 = " + detail::fmt(moments(empirical).mean) +
              ", limit mean = " + detail::fmt(moments(limit).mean) + "; " + std::to_string(empirical.size()) +
              " trials vs " + std::to_string(limit.size()) + " theta samples (" + std::to_string(censored) +
              " censored at t = 1e4)"};
}

inline CriterionResult d5_and_tail(Context& ctx) {
  const auto& t = ctx.tier();
  std::vector<double> d5, d6;
  for (std::size_t i = 0; i < t.tail_trials; ++i) {
    d5.push_back(static_cast<double>(ctx.top()[i].core.count(5)));
    d6.push_back(static_cast<double>(ctx.top()[i].core.count_at_least(6)));
  }
  std::vector<double> rates;
  for (double th : ctx.theta()) rates.push_back(std::isinf(th) ? 0.0 : kD5Rate * std::pow(th, -5.0));
  const auto md5 = moments(d5), md6 = moments(d6), mrate = moments(rates);
  const double rel = md5.mean / mrate.mean - 1;
  const bool pass = md6.mean < t.d6_max_mean && std::abs(rel) <= t.d5_relative_tolerance;
  return {5, "", pass,
          "mean D>=6 = " + detail::fmt(md6.mean, 3) + " (limit " + detail::fmt(t.d6_max_mean, 2) + "); mean D5 = " +
              detail::fmt(md5.mean) + " (se " + detail::fmt(md5.std_error, 2) + ") vs limit mean " +
              detail::fmt(mrate.mean) + " (se " + detail::fmt(mrate.std_error, 2) + "), relative " +
              detail::fmt(100 * rel, 3) + "% vs " + detail::fmt(100 * t.d5_relative_tolerance, 3) + "%"};
}

inline CriterionResult phase_transition(Context& ctx) {
  const auto& t = ctx.tier();
  auto c = ctx.base_config(6);
  c.mode = ExperimentMode::kLambdaSweep;
  c.lambda_values = t.phase_lambdas;
  c.n_values = {t.phase_n};
  c.n_trials = t.phase_trials;
  const auto results = run_critical_experiment(c);
  std::map<double, std::vector<double>> frac;
  for (const auto& r : results) frac[r.lambda].push_back(r.core_fraction());
  bool pass = true;
  double previous_super = -1;
  std::string text;
  for (double lambda : t.phase_lambdas) {
    const double mean = moments(frac[lambda]).mean;
    const bool sub = lambda <= kE + 1e-12;
    bool ok;
    if (sub) {
      ok = mean < t.phase_subcritical_max;
    } else {
      ok = mean > t.phase_supercritical_min && mean > previous_super;
      previous_super = mean;
    }
    pass = pass && ok;
    if (!text.empty()) text += "; ";
    text += "lambda " + detail::fmt(lambda, 4) + ": " + detail::fmt(mean, 3) + (ok ? "" : " [x]");
  }
  return {6, "", pass,
          "mean core fraction at n = " + std::to_string(t.phase_n) + ": " + text + " (need < " +
              detail::fmt(t.phase_subcritical_max, 2) + " for lambda <= e, > " +
              detail::fmt(t.phase_supercritical_min, 2) + " and increasing above)"};
}

inline CriterionResult fluid_tracking(Context& ctx) {
  const auto& t = ctx.tier();
  double worst = 0;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < t.tracking_trials; ++i) {
    const double d = ctx.big()[i].fluid_sup_x;
    worst = std::max(worst, d);
    if (!(d < t.tracking_tolerance)) ++bad;
  }
  return {7, "", bad == 0,
          "max over trials of sup_{k <= " + detail::fmt(t.tracking_fraction, 2) + " t* n} |X_k/n - x(k/n)| = " +
              detail::fmt(worst, 3) + " vs " + detail::fmt(t.tracking_tolerance, 3) + ", " + std::to_string(bad) +
              " of " + std::to_string(t.tracking_trials) + " trials over"};
}

inline CriterionResult ode_cross_check(Context& ctx) {
  const auto& t = ctx.tier();
  const auto s0 = fluid_at_time(0.0);
  OdeOptions options;
  const auto traj = integrate_drift_ode(0.0, {s0.x, s0.v, s0.s}, kTStar - t.ode_gap, t.ode_step, options);
  return {8, "", traj.max_deviation < t.ode_tolerance,
          "RK4 to t* - " + detail::fmt(t.ode_gap, 2) + " with step " + detail::fmt(t.ode_step, 2) +
              ": sup deviation " + detail::fmt(traj.max_deviation, 3) + " vs " + detail::fmt(t.ode_tolerance, 2)};
}

inline CriterionResult solver_contracts(Context& ctx) {
  const auto& t = ctx.tier();
  double worst_z = 0, worst_beta = 0;
  // s/v over [1e-9, 1e3], z over [1e-9, 1e3], log-spaced
  for (std::size_t i = 0; i < t.solver_points; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(t.solver_points - 1);
    const double r = std::pow(10.0, -9.0 + 12.0 * u);
    const double z = solve_z(1.0, r);
    worst_z = std::max(worst_z, std::abs(::kslab::detail::excess_ratio(z) - r));
    const double b = solve_beta(r);
    worst_beta = std::max(worst_beta, std::abs(std::log(b) + kE * b - r));
  }
  const double small = solve_z(1.0, 1e-6) / 3e-6;
  const bool pass = worst_z < t.solver_tolerance && worst_beta < t.solver_tolerance &&
                    std::abs(small - 1) < t.small_z_tolerance;
  return {9, "", pass,
          "max residual z " + detail::fmt(worst_z, 3) + ", beta " + detail::fmt(worst_beta, 3) + " over " +
              std::to_string(t.solver_points) + " log-spaced inputs (limit " + detail::fmt(t.solver_tolerance, 2) +
              "); z(1,1e-6)/3e-6 = " + detail::fmt(small, 10)};
}

inline CriterionResult gradient_windows(Context& ctx) {
  const auto& t = ctx.tier();
  bool pass = true;
  std::string text;
  for (double eps : t.gradient_eps) {
    const auto st = fluid_at_time(kTStar - eps);
    const auto j = numeric_gradient_phi(st.x, st.v, st.s, 1e-4);
    const double ax = j[0][0] * eps, cs = j[2][2] * eps, cv = j[2][1] * std::sqrt(eps);
    const bool ok = ax >= -1.3 && ax <= -0.7 && cs >= -1.95 && cs <= -1.05 &&
                    std::abs(cv / std::sqrt(kE) - 1) <= 0.25;
    pass = pass && ok;
    if (!text.empty()) text += "; ";
    text += "eps " + detail::fmt(eps, 2) + ": dPhiA/dx*eps " + detail::fmt(ax) + ", dPhiC/ds*eps " +
              detail::fmt(cs) + ", dPhiC/dv*sqrt(eps) " + detail::fmt(cv) + (ok ? "" : " [x]");
  }
  return {10, "", pass, text + " (windows [-1.3,-0.7], [-1.95,-1.05], e^1/2 +- 25%)"};
}

inline CriterionResult drift_variance(Context& ctx) {
  const auto& t = ctx.tier();
  std::vector<const KsTrace*> ptrs;
  for (const auto& tr : ctx.big_traces()) ptrs.push_back(&tr);
  const auto est = estimate_local_drift_variance(ptrs, t.big_n, t.drift_eps);
  const double ratio = est.dx.variance / est.z_reference;
  const double zb = (est.dv.mean - est.phi_b_reference) / est.dv.mean_se;
  const double zc = (est.ds.mean - est.phi_c_reference) / est.ds.mean_se;
  const bool pass = std::abs(ratio - 1) <= t.variance_tolerance && std::abs(zb) <= t.drift_sigmas &&
                    std::abs(zc) <= t.drift_sigmas;
  return {11, "", pass,
          "var(dX)/z = " + detail::fmt(ratio) + " (z = " + detail::fmt(est.z_reference) + ", need within " +
              detail::fmt(100 * t.variance_tolerance, 3) + "%); mean dV " + detail::fmt(est.dv.mean, 6) +
              " vs fluid " + detail::fmt(est.phi_b_reference, 6) + " (" + detail::fmt(zb, 3) + " se); mean dS " +
              detail::fmt(est.ds.mean, 6) + " vs fluid " + detail::fmt(est.phi_c_reference, 6) + " (" +
              detail::fmt(zc, 3) + " se); " + std::to_string(est.n_increments) + " increments from " +
              std::to_string(est.n_traces) + " traces, eps window [" + detail::fmt(t.drift_eps, 2) + ", " +
              detail::fmt(2 * t.drift_eps, 2) + "]"};
}

inline CriterionResult core_composition(Context& ctx) {
  const auto& t = ctx.tier();
  const std::uint64_t v = t.composition_v;
  const auto s = static_cast<std::uint64_t>(std::llround(std::pow(static_cast<double>(v), 2.0 / 3.0)));
  std::vector<std::vector<std::uint64_t>> draws(t.composition_trials);
  const std::uint64_t seed = derive_seed(t.seed, {12});
  parallel_for(draws.size(), ctx.threads(), [&](std::size_t i) {
    Rng rng = make_rng(derive_seed(seed, {i}));
    draws[i] = sample_heavy_degree_counts(v, s, rng);
  });
  std::vector<double> c2, c3, c4, c5;
  for (const auto& d : draws) {
    auto at = [&](std::size_t k) { return k < d.size() ? static_cast<double>(d[k]) : 0.0; };
    c2.push_back(at(2));
    c3.push_back(at(3));
    c4.push_back(at(4));
    c5.push_back(at(5));
  }
  const double vd = static_cast<double>(v);
  const double x = static_cast<double>(s) / std::pow(vd, 2.0 / 3.0);
  const double r2 = moments(c2).mean / vd;
  const double r3 = moments(c3).mean / (x * std::pow(vd, 2.0 / 3.0));
  const double r4 = moments(c4).mean / (0.75 * x * x * std::pow(vd, 1.0 / 3.0));
  const auto m5 = moments(c5);
  const double target5 = 9.0 * x * x * x / 20.0;
  const double z5 = (m5.mean - target5) / m5.std_error;
  const bool pass = r2 >= 0.98 && r2 <= 1.02 && r3 >= 0.9 && r3 <= 1.1 && r4 >= 0.7 && r4 <= 1.3 && std::abs(z5) <= 3;
  return {12, "", pass,
          "v = " + std::to_string(v) + ", s = " + std::to_string(s) + ": D2/v = " + detail::fmt(r2, 6) +
              ", D3/(x v^2/3) = " + detail::fmt(r3) + ", D4/(0.75 x^2 v^1/3) = " + detail::fmt(r4) + ", mean D5 = " +
              detail::fmt(m5.mean) + " vs " + detail::fmt(target5) + " (" + detail::fmt(z5, 3) + " se), " +
              std::to_string(t.composition_trials) + " trials"};
}

inline CriterionResult simplicity(Context& ctx) {
  const auto& t = ctx.tier();
  auto frequency = [&](std::uint32_t degree, std::uint64_t salt) {
    const std::vector<std::uint32_t> degrees(t.simplicity_v, degree);
    const unsigned workers = std::max(1u, ctx.threads());
    std::vector<std::uint64_t> hits(workers, 0);
    parallel_for(workers, workers, [&](std::size_t w) {
      ConfigurationSimplicityTester tester(degrees);
      Rng rng = make_rng(derive_seed(t.seed, {13, salt, w}));
      for (std::uint64_t i = w; i < t.simplicity_trials; i += workers) hits[w] += tester.trial(rng) ? 1 : 0;
    });
    std::uint64_t total = 0;
    for (auto h : hits) total += h;
    return static_cast<double>(total) / static_cast<double>(t.simplicity_trials);
  };
  const double f3 = frequency(3, 3), f2 = frequency(2, 2);
  DegreeSequence three, two;
  three.counts[3] = t.simplicity_v;
  two.counts[2] = t.simplicity_v;
  const double p3 = simple_probability(three), p2 = simple_probability(two);
  const bool pass = std::abs(f3 - p3) <= t.simplicity_tolerance && std::abs(f2 - p2) <= t.simplicity_tolerance;
  return {13, "", pass,
          "3-regular: " + detail::fmt(f3, 5) + " vs " + detail::fmt(p3, 5) + "; 2-regular: " + detail::fmt(f2, 5) +
              " vs " + detail::fmt(p2, 5) + " (v = " + std::to_string(t.simplicity_v) + ", " +
              std::to_string(t.simplicity_trials) + " trials, tolerance " +
              detail::fmt(t.simplicity_tolerance, 2) + ")"};
}

namespace detail {

// Checks the certificate and the optimality identity on one graph.
// Returns an empty string on success.
inline std::string check_optimality(const Multigraph& g, Rng& rng) {
  const int alpha = oracle::max_independent_set(g);
  auto run = run_karp_sipser(g, rng, false);
  const auto& cert = run.certificate;
  std::vector<char> in_set(g.n_vertices(), 0), matched(g.n_vertices(), 0);
  for (Vertex v : cert.independent_set) in_set[v] = 1;
  bool ok = true;
  g.for_each_alive_edge([&](EdgeId, const Edge& e) {
    if (in_set[e.u] && in_set[e.v]) ok = false;
  });
  if (!ok) return "independent set has an edge";
  for (auto [a, b] : cert.matching) {
    if (matched[a] || matched[b]) return "matching is not vertex-disjoint";
    matched[a] = matched[b] = 1;
    bool found = false;
    g.for_each_alive_edge([&](EdgeId, const Edge& e) {
      if ((e.u == a && e.v == b) || (e.u == b && e.v == a)) found = true;
    });
    if (!found) return "matching edge missing from the graph";
  }
  const int core_alpha = oracle::max_independent_set(run.core);
  if (static_cast<int>(cert.independent_set.size()) + core_alpha != alpha) {
    return "|I| + alpha(core) = " + std::to_string(cert.independent_set.size() + core_alpha) + " but alpha = " +
           std::to_string(alpha);
  }
  return "";
}

}  // namespace detail

inline CriterionResult combinatorial_oracles(Context& ctx) {
  const auto& t = ctx.tier();
  Rng rng = make_rng(derive_seed(t.seed, {14}));
  std::uint64_t abelian_fail = 0, reset_fail = 0;
  for (std::uint64_t i = 0; i < t.abelian_graphs; ++i) {
    const int n = 2 + static_cast<int>(uniform_index(rng, t.abelian_max_n - 1));
    const double lambda = 1.0 + 3.5 * uniform01(rng);
    const auto m = static_cast<std::size_t>(std::llround(lambda * n / 2));
    const auto g = sample_uniform_multigraph(n, m, rng);
    Rng r1 = make_rng(rng()), r2 = make_rng(rng());
    const auto a = run_karp_sipser(g, r1, false);
    const auto b = run_karp_sipser(g, r2, false);
    if (!oracle::isomorphic(a.core.compacted(), b.core.compacted())) ++abelian_fail;
    auto again = run_karp_sipser(a.core, r1, false);
    if (again.trace.extinction_step != 0 || again.core.n_alive_edges() != a.core.n_alive_edges()) ++reset_fail;
  }

  std::uint64_t checked = 0, optimality_fail = 0;
  std::string first_failure;
  auto check = [&](const Multigraph& g) {
    ++checked;
    const auto msg = detail::check_optimality(g, rng);
    if (!msg.empty()) {
      ++optimality_fail;
      if (first_failure.empty()) first_failure = msg;
    }
  };
  for (int n = 1; n <= t.exhaustive_max_n; ++n) {
    const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs); ++mask) check(oracle::graph_from_mask(n, mask));
  }
  for (int n = t.exhaustive_max_n + 1; n <= t.corpus_max_n; ++n) {
    std::uint64_t kept = 0;
    while (kept < t.corpus_graphs_per_n) {
      const auto g = oracle::random_simple_graph(n, 0.1 + 0.6 * uniform01(rng), rng);
      if (!oracle::connected(g)) continue;
      check(g);
      ++kept;
    }
  }
  for (std::uint64_t i = 0; i < t.random_graphs; ++i) {
    const int n = 1 + static_cast<int>(uniform_index(rng, t.random_max_n));
    check(oracle::random_simple_graph(n, 0.05 + 0.7 * uniform01(rng), rng));
  }
  const bool pass = abelian_fail == 0 && reset_fail == 0 && optimality_fail == 0;
  return {14, "", pass,
          "abelian: " + std::to_string(abelian_fail) + " of " + std::to_string(t.abelian_graphs) +
              " core mismatches (n <= " + std::to_string(t.abelian_max_n) + "), re-peel changes " +
              std::to_string(reset_fail) + "; optimality: " + std::to_string(optimality_fail) + " failures over " +
              std::to_string(checked) + " graphs (all labelled graphs n <= " + std::to_string(t.exhaustive_max_n) +
              ", connected corpus to n = " + std::to_string(t.corpus_max_n) + ", random n <= " +
              std::to_string(t.random_max_n) + ")" + (first_failure.empty() ? "" : "; first: " + first_failure)};
}

inline CriterionResult multigraph_simple_transfer(Context& ctx) {
  const auto& t = ctx.tier();
  auto sample = [&](bool simple) {
    auto c = ctx.base_config(15);
    c.n_values = {t.transfer_n};
    c.n_trials = t.transfer_trials;
    c.simple = simple;
    if (simple) c.master_seed = derive_seed(c.master_seed, {1});
    std::vector<double> out;
    for (const auto& r : run_critical_experiment(c)) {
      out.push_back(static_cast<double>(r.core.count(2)) * std::pow(static_cast<double>(r.n), -0.6));
    }
    return out;
  };
  const auto multi = sample(false), simple = sample(true);
  const auto ks = ks_two_sample(multi, simple);
  return {15, "", ks.p_value > t.transfer_min_p,
          "KS of n^-3/5 D2, multigraph vs simple at n = " + std::to_string(t.transfer_n) + ": statistic " +
              detail::fmt(ks.statistic) + ", p = " + detail::fmt(ks.p_value, 3) + " (need > " +
              detail::fmt(t.transfer_min_p, 2) + "); means " + detail::fmt(moments(multi).mean) + " vs " +
              detail::fmt(moments(simple).mean) + ", " + std::to_string(t.transfer_trials) + " trials each"};
}

/// Diagnostics on the big dataset that are not numbered criteria: the core
/// degree-3 count against the core surplus, and D2 against 2 t_theta n^{3/5}.
inline std::vector<CriterionResult> supplementary(Context& ctx) {
  const auto& t = ctx.tier();
  std::vector<double> d3_over_surplus, d2_over_margin;
  for (std::size_t i = 0; i < t.big_trials; ++i) {
    const auto& r = ctx.big()[i];
    const double surplus = 2.0 * static_cast<double>(r.core.n_core_edges) - 2.0 * static_cast<double>(r.core.n_core_vertices);
    if (surplus > 0) d3_over_surplus.push_back(static_cast<double>(r.core.count(3)) / surplus);
    const double margin = 2 * r.t_theta * std::pow(static_cast<double>(r.n), 0.6);
    if (margin > 0) d2_over_margin.push_back(static_cast<double>(r.core.count(2)) / margin);
  }
  std::vector<CriterionResult> out;
  const auto a = moments(d3_over_surplus);
  const double cv = a.mean > 0 ? std::sqrt(a.variance) / a.mean : INFINITY;
  out.push_back({101, "d3-tracks-core-surplus", cv < 0.3 && std::abs(a.mean - 1) < 0.3,
                 "D3 / core surplus: mean " + detail::fmt(a.mean) + ", CV " + detail::fmt(cv, 3) + " over " +
                     std::to_string(a.n) + " trials (need CV < 0.3)"});
  std::size_t within = 0;
  for (double x : d2_over_margin) within += std::abs(x - 1) <= 0.1 ? 1 : 0;
  const auto b = moments(d2_over_margin);
  out.push_back({102, "d2-tracks-extinction-margin", within == d2_over_margin.size() && !d2_over_margin.empty(),
                 "D2 / (2 t_theta n^3/5): mean " + detail::fmt(b.mean) + ", " + std::to_string(within) + " of " +
                     std::to_string(b.n) + " trials within 10%"});
  return out;
}

inline CriterionResult run_criterion(Context& ctx, int id) {
  using Fn = CriterionResult (*)(Context&);
  static const Fn table[] = {nullptr,          extinction_time,  scaling_exponents,   limit_law_ratios,
                             d2_distribution,  d5_and_tail,      phase_transition,    fluid_tracking,
                             ode_cross_check,  solver_contracts, gradient_windows,    drift_variance,
                             core_composition, simplicity,       combinatorial_oracles, multigraph_simple_transfer};
  require(id >= 1 && id <= kCriterionCount, ErrorCode::kUsage, "no criterion " + std::to_string(id));
  const auto start = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = table[id](ctx);
  } catch (const std::exception& e) {
    r = {id, "", false, std::string("error: ") + e.what()};
  }
  r.id = id;
  r.name = criterion_name(id);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline std::string format_line(const CriterionResult& r) {
  std::ostringstream out;
  out << (r.pass ? "PASS" : "FAIL") << "  ";
  if (r.id <= kCriterionCount) {
    out << "criterion " << std::setw(2) << r.id;
  } else {
    out << "extra     ";
  }
  out << "  " << std::left << std::setw(28) << r.name << std::right << ' ' << r.detail << "  [" << std::fixed
      << std::setprecision(1) << r.seconds << " s]";
  return out.str();
}

struct Report {
  std::string tier;
  std::vector<CriterionResult> criteria;
  std::vector<CriterionResult> extras;
  bool all_pass() const {
    return std::all_of(criteria.begin(), criteria.end(), [](const auto& r) { return r.pass; });
  }
};

/// Runs the selected criteria (all when empty), printing one line each as it
/// finishes. Extras are computed when every big-dataset criterion is selected.
inline Report run_acceptance(const Tier& tier, std::vector<int> selection, unsigned threads, std::ostream* log,
                             bool extras = true) {
  if (selection.empty()) {
    for (int i = 1; i <= kCriterionCount; ++i) selection.push_back(i);
  }
  Context ctx(tier, threads);
  Report report;
  report.tier = tier.name;
  for (int id : selection) {
    report.criteria.push_back(run_criterion(ctx, id));
    if (log) *log << format_line(report.criteria.back()) << std::endl;
  }
  const bool uses_big = std::find(selection.begin(), selection.end(), 1) != selection.end();
  if (extras && uses_big) {
    const auto start = std::chrono::steady_clock::now();
    for (auto r : supplementary(ctx)) {
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      report.extras.push_back(r);
      if (log) *log << format_line(r) << std::endl;
    }
  }
  return report;
}

inline nlohmann::json to_json(const Report& report) {
  using nlohmann::json;
  auto one = [](const CriterionResult& r) {
    return json{{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}};
  };
  json out = {{"tier", report.tier}, {"tier_table_version", kTierTableVersion}, {"all_pass", report.all_pass()}};
  out["criteria"] = json::array();
  for (const auto& r : report.criteria) out["criteria"].push_back(one(r));
  out["extras"] = json::array();
  for (const auto& r : report.extras) out["extras"].push_back(one(r));
  return out;
}

}  // namespace kslab::acceptance
