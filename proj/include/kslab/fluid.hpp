#pragma once

// Deterministic side of the leaf-removal chain: the tilt parameter z(v, s),
// the beta parametrization, the closed-form fluid trajectory, the drift
// field and its numerical cross-checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "kslab/errors.hpp"

namespace kslab {

inline constexpr double kE = std::numbers::e;
/// Extinction time of the critical fluid limit, 1 - 3/(2e).
inline constexpr double kTStar = 1.0 - 3.0 / (2.0 * std::numbers::e);

struct FluidState {
  double t = 0;
  double x = 0;
  double v = 0;
  double s = 0;
  double z = 0;
  double beta = 0;
};

struct DriftVector {
  double phi_a = 0;
  double phi_b = 0;
  double phi_c = 0;
};

namespace detail {

// f(z) = e^z - z - 1 divided by z^2, i.e. sum_{j>=2} z^{j-2}/j!.
inline double f_over_z2(double z) {
  if (z < 0.5) {
    double term = 0.5, sum = 0.5;
    for (int j = 3; j < 40 && term > 1e-18 * sum; ++j) {
      term *= z / j;
      sum += term;
    }
    return sum;
  }
  return (std::expm1(z) - z) / (z * z);
}

inline double f_tilt(double z) { return z * z * f_over_z2(z); }

// h(z) = z(e^z - 1)/f(z) - 2, increasing from h(0) = 0.
inline double excess_ratio(double z) {
  if (z < 1.0) {
    // z * [sum_{j>=3} (j-2) z^{j-3}/j!] / [sum_{j>=2} z^{j-2}/j!]
    double num = 0, zp = 1, fact = 6;
    for (int j = 3; j < 40; ++j) {
      if (j > 3) fact *= j;
      const double term = (j - 2) * zp / fact;
      num += term;
      if (term < 1e-18 * num) break;
      zp *= z;
    }
    return z * num / f_over_z2(z);
  }
  const double em = std::exp(-z);
  const double den = 1.0 - (1.0 + z) * em;
  return (z * (1.0 - em) - 2.0 * den) / den;
}

// d/dz of z(e^z - 1)/f(z) = e^z (2 cosh z - 2 - z^2) / f(z)^2.
inline double excess_ratio_derivative(double z) {
  if (z < 1.0) {
    // 2 cosh z - 2 - z^2 = sum_{k>=2} 2 z^{2k}/(2k)!, divided by z^4.
    double term = 2.0 / 24.0, sum = term;
    for (int k = 3; k < 30; ++k) {
      term *= z * z / ((2.0 * k - 1) * (2.0 * k));
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    const double fz = f_over_z2(z);
    return std::exp(z) * sum / (fz * fz);
  }
  const double em = std::exp(-z);
  const double den = 1.0 - (1.0 + z) * em;
  return (1.0 + em * em - 2.0 * em - z * z * em) / (den * den);
}

// z + z e^{-z} + 2 e^{-z} - 2 = sum_{j>=3} (-1)^{j+1} (j-2) z^j / j!.
inline double surplus_bracket(double z) {
  if (z < 1.0) {
    double zp = z * z * z, fact = 6, sum = 0;
    for (int j = 3; j < 40; ++j) {
      if (j > 3) {
        zp *= z;
        fact *= j;
      }
      const double term = (j - 2) * zp / fact;
      sum += (j % 2 == 1) ? term : -term;
      if (term < 1e-19 * std::abs(sum)) break;
    }
    return sum;
  }
  const double em = std::exp(-z);
  return z + z * em + 2.0 * em - 2.0;
}

// u - log(1 + u), stable for small u.
inline double u_minus_log1p(double u) {
  if (u < 1e-2) {
    double term = u, sum = 0;
    for (int k = 2; k < 30; ++k) {
      term *= -u;
      const double add = -term / k;  // (-1)^k u^k / k
      sum += add;
      if (std::abs(add) < 1e-19 * sum) break;
    }
    return sum;
  }
  return u - std::log1p(u);
}

// Offset u = e*beta - 1 >= 0 solving u + log1p(u) = z.
inline double beta_offset(double z) {
  if (z == 0) return 0;
  // The map is concave and increasing, so Newton from u = 0 increases monotonically.
  double u = 0;
  for (int it = 0; it < 200; ++it) {
    const double g = u + std::log1p(u) - z;
    const double step = g / (1.0 + 1.0 / (1.0 + u));
    const double next = u - step;
    if (!(next > u) || next - u <= 4 * std::numeric_limits<double>::epsilon() * next) {
      u = std::max(u, next);
      break;
    }
    u = next;
  }
  return u;
}

// Distance to extinction t* - t as a function of the offset u.
inline double time_to_extinction(double u) {
  const double l = std::log1p(u);
  return (u_minus_log1p(u) + 0.5 * l * l) / kE;
}

inline FluidState state_from_offset(double u, double t) {
  FluidState st;
  st.beta = (1.0 + u) / kE;
  st.z = u + std::log1p(u);
  st.t = t;
  const double z = st.z;
  st.v = st.beta * std::exp(-z) * f_tilt(z);
  const long double zl = z;
  const long double bracket = zl / std::numbers::e_v<long double> - static_cast<long double>(st.beta) * -std::expm1(-zl);
  st.x = static_cast<double>(zl * bracket);
  if (st.x < 0) st.x = 0;
  st.s = st.beta * surplus_bracket(z);
  return st;
}

}  // namespace detail

inline double tilt_normalizer(double z) { return detail::f_tilt(z); }

/// Tilt parameter: the unique z >= 0 with z(e^z - 1)/(e^z - z - 1) = 2 + s/v,
/// with z(v, 0) = 0.
inline double solve_z(double v, double s) {
  require(v > 0, ErrorCode::kNonpositiveV, "solve_z requires v > 0");
  require(s >= 0, ErrorCode::kInvalidArgument, "solve_z requires s >= 0");
  if (s == 0) return 0;
  const double r = s / v;
  if (r < 1e-8) return 3.0 * r;
  double lo = 0, hi = r + 2.0;
  double z = r < 0.5 ? 3.0 * r : r + 1.0;
  if (!(z > lo && z < hi)) z = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    const double g = detail::excess_ratio(z) - r;
    if (g == 0) return z;
    if (g > 0) hi = z; else lo = z;
    if (std::abs(g) <= 1e-15 * std::max(1.0, r)) return z;
    double next = z - g / detail::excess_ratio_derivative(z);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == z || hi - lo <= 2 * std::numeric_limits<double>::epsilon() * hi) return next;
    z = next;
  }
  return z;
}

/// beta(z): the root in [1/e, inf) of beta * exp(e * beta) = exp(z).
inline double solve_beta(double z) {
  require(z >= 0, ErrorCode::kInvalidArgument, "solve_beta requires z >= 0");
  return (1.0 + detail::beta_offset(z)) / kE;
}

/// Closed-form fluid limit parametrized by z in [0, e].
inline FluidState fluid_at_z(double z) {
  require(z >= 0 && z <= kE, ErrorCode::kOutOfRange, "fluid_at_z requires 0 <= z <= e");
  const double u = detail::beta_offset(z);
  FluidState st = detail::state_from_offset(u, std::max(0.0, kTStar - detail::time_to_extinction(u)));
  st.z = z;
  return st;
}

/// Closed-form fluid limit at rescaled time t in [0, t*].
inline FluidState fluid_at_time(double t) {
  require(t >= 0 && t <= kTStar, ErrorCode::kOutOfRange, "fluid_at_time requires 0 <= t <= t*");
  const double eps = kTStar - t;
  if (eps == 0) return detail::state_from_offset(0, t);
  double u;
  if (eps < 1e-8) {
    // beta = 1/e + e^{-1/2} eps^{1/2} + (5/12) eps + O(eps^{3/2})
    u = std::sqrt(kE * eps) + kE * 5.0 / 12.0 * eps;
  } else {
    // time_to_extinction is increasing in u; dt/dbeta vanishes at u = 0.
    double lo = 0, hi = kE - 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (detail::time_to_extinction(mid) < eps) lo = mid; else hi = mid;
    }
    u = 0.5 * (lo + hi);
  }
  return detail::state_from_offset(u, t);
}

/// Drift field (Phi_A, Phi_B, Phi_C) of (X, V, S) per step.
inline DriftVector drift_phi(double x, double v, double s) {
  require(x > 0 && v > 0, ErrorCode::kNonpositiveVOrX, "drift_phi requires x > 0 and v > 0");
  require(s >= 0, ErrorCode::kInvalidArgument, "drift_phi requires s >= 0");
  const double z = solve_z(v, s);
  // b = z^2 e^z / f(z), a = z^4 e^z / f(z)^2 = b^2 e^{-z}; both finite as z -> 0.
  double a, b;
  if (z < 1.0) {
    b = std::exp(z) / detail::f_over_z2(z);
    a = b * b * std::exp(-z);
  } else {
    const double em = std::exp(-z);
    const double den = 1.0 - (1.0 + z) * em;
    b = z * z / den;
    a = b * b * em;
  }
  const double h = x + 2.0 * v + s;
  const double xh = x / h;
  const double vv = v * v * a / (h * h);
  const double xv = x * v * b / (h * h);
  DriftVector d;
  d.phi_a = -1.0 - xh + vv - xv;
  d.phi_b = -1.0 + xh - vv;
  d.phi_c = 1.0 - xh - 2.0 * v * b / h + vv + xv;
  return d;
}

/// Leading-order endgame behaviour at eps = t* - t.
struct EndgameApprox {
  double x = 0;
  double v = 0;
  double s = 0;
  double z = 0;
};

inline EndgameApprox endgame_asymptotics(double eps) {
  require(eps > 0 && eps < 0.1, ErrorCode::kOutOfRange, "endgame_asymptotics requires 0 < eps < 0.1");
  const double root_e = std::sqrt(kE);
  return {kE / 3.0 * eps * eps, 2.0 * eps, 4.0 * root_e / 3.0 * std::pow(eps, 1.5),
          2.0 * root_e * std::sqrt(eps)};
}

struct OdeTrajectory {
  std::vector<FluidState> points;
  double max_deviation = 0;  // sup-norm distance to the closed form over (x, v, s)
};

struct OdeOptions {
  double max_deviation = std::numeric_limits<double>::infinity();
};

/// Classical RK4 integration of the drift field, compared against the closed form.
inline OdeTrajectory integrate_drift_ode(double t0, std::array<double, 3> state0, double t1, double step,
                                         const OdeOptions& options = {}) {
  require(t0 >= 0 && t0 <= t1 && t1 < kTStar, ErrorCode::kOutOfRange, "integrate_drift_ode requires 0 <= t0 <= t1 < t*");
  require(state0[0] > 0 && state0[1] > 0 && state0[2] > 0, ErrorCode::kInvalidArgument,
          "integrate_drift_ode requires a strictly positive start");
  require(step > 0, ErrorCode::kInvalidArgument, "integrate_drift_ode requires step > 0");

  auto make_point = [](double t, const std::array<double, 3>& y) {
    FluidState p;
    p.t = t;
    p.x = y[0];
    p.v = y[1];
    p.s = y[2];
    p.z = solve_z(y[1], y[2]);
    p.beta = solve_beta(p.z);
    return p;
  };
  auto deviation = [](double t, const std::array<double, 3>& y) {
    const FluidState ref = fluid_at_time(t);
    return std::max({std::abs(y[0] - ref.x), std::abs(y[1] - ref.v), std::abs(y[2] - ref.s)});
  };
  auto field = [](const std::array<double, 3>& y) {
    const DriftVector d = drift_phi(y[0], y[1], y[2]);
    return std::array<double, 3>{d.phi_a, d.phi_b, d.phi_c};
  };

  OdeTrajectory out;
  std::array<double, 3> y = state0;
  double t = t0;
  out.points.push_back(make_point(t, y));
  out.max_deviation = deviation(t, y);
  const auto n_steps = static_cast<long long>(std::ceil((t1 - t0) / step - 1e-9));
  for (long long i = 0; i < n_steps; ++i) {
    const double t_next = (i + 1 == n_steps) ? t1 : t0 + static_cast<double>(i + 1) * step;
    const double h = t_next - t;
    const auto k1 = field(y);
    std::array<double, 3> tmp;
    for (int j = 0; j < 3; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
    const auto k2 = field(tmp);
    for (int j = 0; j < 3; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
    const auto k3 = field(tmp);
    for (int j = 0; j < 3; ++j) tmp[j] = y[j] + h * k3[j];
    const auto k4 = field(tmp);
    for (int j = 0; j < 3; ++j) y[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    t = t_next;
    out.points.push_back(make_point(t, y));
    out.max_deviation = std::max(out.max_deviation, deviation(t, y));
    if (out.max_deviation > options.max_deviation) {
      throw Error(ErrorCode::kStepTooLarge, "ODE deviation from the closed form exceeds the configured bound");
    }
  }
  return out;
}

/// Jacobian J[i][j] = d Phi_i / d coord_j with coords (x, v, s) and Phi = (A, B, C).
using Jacobian = std::array<std::array<double, 3>, 3>;

/// Centered differences of drift_phi with relative step h per coordinate,
/// Richardson-extrapolated from steps h and h/2. Throws h-too-large when the
/// two estimates disagree by more than `tolerance` (relative).
inline Jacobian numeric_gradient_phi(double x, double v, double s, double h, double tolerance = 1e-3) {
  require(x > 0 && v > 0 && s > 0, ErrorCode::kInvalidArgument, "numeric_gradient_phi requires positive inputs");
  require(h > 0 && h < 0.5, ErrorCode::kHTooLarge, "relative step must lie in (0, 0.5)");
  const std::array<double, 3> p{x, v, s};
  auto eval = [](const std::array<double, 3>& q) {
    const DriftVector d = drift_phi(q[0], q[1], q[2]);
    return std::array<double, 3>{d.phi_a, d.phi_b, d.phi_c};
  };
  auto central = [&](int j, double rel) {
    std::array<double, 3> up = p, dn = p;
    const double delta = rel * p[j];
    up[j] += delta;
    dn[j] -= delta;
    const auto fu = eval(up), fd = eval(dn);
    std::array<double, 3> g;
    for (int i = 0; i < 3; ++i) g[i] = (fu[i] - fd[i]) / (up[j] - dn[j]);
    return g;
  };
  Jacobian jac{};
  for (int j = 0; j < 3; ++j) {
    const auto coarse = central(j, h);
    const auto fine = central(j, h / 2);
    for (int i = 0; i < 3; ++i) {
      const double extrapolated = (4.0 * fine[i] - coarse[i]) / 3.0;
      const double scale = std::max({std::abs(fine[i]), std::abs(coarse[i]), 1e-300});
      // Entries that are O(1) next to O(1/eps) neighbours are compared on the row scale.
      const double row_scale = std::max({std::abs(fine[0]), std::abs(fine[1]), std::abs(fine[2]), scale});
      if (std::abs(fine[i] - coarse[i]) > tolerance * std::max(scale, 1e-6 * row_scale)) {
        throw Error(ErrorCode::kHTooLarge, "finite differences do not converge at this step");
      }
      jac[i][j] = extrapolated;
    }
  }
  return jac;
}

}  // namespace kslab
