#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "kslab/errors.hpp"

namespace kslab {

struct Moments {
  std::size_t n = 0;
  double mean = 0;
  double variance = 0;  // unbiased
  double std_error = 0;
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  m.n = xs.size();
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(m.n);
  double sq = 0;
  for (double x : xs) sq += (x - m.mean) * (x - m.mean);
  if (m.n > 1) {
    m.variance = sq / static_cast<double>(m.n - 1);
    m.std_error = std::sqrt(m.variance / static_cast<double>(m.n));
  }
  return m;
}

inline double median(std::vector<double> xs) {
  require(!xs.empty(), ErrorCode::kInsufficientData, "median of an empty sample");
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
  const double upper = xs[mid];
  if (xs.size() % 2 == 1) return upper;
  return 0.5 * (upper + *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid)));
}

/// Type 7 (linear interpolation) quantile of a sorted sample.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
  require(!sorted.empty(), ErrorCode::kInsufficientData, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0 || lo == hi) return sorted[lo];
  if (std::isinf(sorted[hi])) return sorted[hi];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile_or_nan(const std::vector<double>& sorted, double p) {
  return sorted.empty() ? std::numeric_limits<double>::quiet_NaN() : sorted_quantile(sorted, p);
}

struct SlopeFit {
  double slope = 0;
  double std_error = 0;
  double intercept = 0;
};

/// Least-squares fit of log(statistic) against log(n).
inline SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  std::set<double> distinct;
  for (auto [n, y] : points) {
    require(n > 0, ErrorCode::kInvalidArgument, "n must be positive");
    require(y > 0, ErrorCode::kNonpositiveStatistic, "statistic must be positive for a log-log fit");
    distinct.insert(n);
  }
  require(distinct.size() >= 4, ErrorCode::kInsufficientData, "need at least 4 distinct n");
  const double k = static_cast<double>(points.size());
  double mx = 0, my = 0;
  for (auto [n, y] : points) {
    mx += std::log(n);
    my += std::log(y);
  }
  mx /= k;
  my /= k;
  double sxx = 0, sxy = 0;
  for (auto [n, y] : points) {
    sxx += (std::log(n) - mx) * (std::log(n) - mx);
    sxy += (std::log(n) - mx) * (std::log(y) - my);
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0;
  for (auto [n, y] : points) {
    const double r = std::log(y) - fit.intercept - fit.slope * std::log(n);
    ssr += r * r;
  }
  fit.std_error = points.size() > 2 ? std::sqrt(ssr / (k - 2) / sxx) : 0.0;
  return fit;
}

/// Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0, sign = 1;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0;
  double p_value = 1;
};

/// Two-sample Kolmogorov-Smirnov sup distance with the asymptotic p-value
/// (effective-size correction of Stephens).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorCode::kInsufficientData, "both samples must be nonempty");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

struct ChiSquareResult {
  double statistic = 0;
  int dof = 0;
  double p_value = 1;
};

namespace detail {

// Merges adjacent bins until every merged bin has weight >= min_weight.
inline std::vector<std::pair<double, double>> merge_bins(const std::vector<std::pair<double, double>>& bins,
                                                         double min_weight, auto weight) {
  std::vector<std::pair<double, double>> out;
  std::pair<double, double> acc{0, 0};
  for (const auto& b : bins) {
    acc.first += b.first;
    acc.second += b.second;
    if (weight(acc) >= min_weight) {
      out.push_back(acc);
      acc = {0, 0};
    }
  }
  if (acc.first + acc.second > 0) {
    if (out.empty()) {
      out.push_back(acc);
    } else {
      out.back().first += acc.first;
      out.back().second += acc.second;
    }
  }
  return out;
}

inline double chi_square_p(double statistic, int dof) {
  if (dof <= 0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

}  // namespace detail

/// Two-sample chi-square test of homogeneity for histograms a and b over the
/// same bins. Sparse bins are merged so that each carries >= 10 pooled counts.
inline ChiSquareResult chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<std::pair<double, double>> bins(std::max(a.size(), b.size()), {0.0, 0.0});
  for (std::size_t i = 0; i < a.size(); ++i) bins[i].first = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) bins[i].second = b[i];
  const auto merged = detail::merge_bins(bins, 10.0, [](const auto& p) { return p.first + p.second; });
  double na = 0, nb = 0;
  for (auto [x, y] : merged) {
    na += x;
    nb += y;
  }
  require(na > 0 && nb > 0, ErrorCode::kInsufficientData, "empty histogram");
  ChiSquareResult r;
  const double ka = std::sqrt(nb / na), kb = std::sqrt(na / nb);
  for (auto [x, y] : merged) {
    if (x + y > 0) r.statistic += (ka * x - kb * y) * (ka * x - kb * y) / (x + y);
  }
  r.dof = static_cast<int>(merged.size()) - 1;
  r.p_value = detail::chi_square_p(r.statistic, r.dof);
  return r;
}

/// Goodness of fit of observed counts to bin probabilities; bins merged until
/// the expected count is >= 5.
inline ChiSquareResult chi_square_goodness_of_fit(const std::vector<double>& observed,
                                                  const std::vector<double>& probabilities) {
  double total = 0;
  for (double o : observed) total += o;
  require(total > 0, ErrorCode::kInsufficientData, "no observations");
  std::vector<std::pair<double, double>> bins(std::max(observed.size(), probabilities.size()), {0.0, 0.0});
  for (std::size_t i = 0; i < observed.size(); ++i) bins[i].first = observed[i];
  for (std::size_t i = 0; i < probabilities.size(); ++i) bins[i].second = probabilities[i] * total;
  const auto merged = detail::merge_bins(bins, 5.0, [](const auto& p) { return p.second; });
  ChiSquareResult r;
  for (auto [o, e] : merged) {
    if (e > 0) r.statistic += (o - e) * (o - e) / e;
  }
  r.dof = static_cast<int>(merged.size()) - 1;
  r.p_value = detail::chi_square_p(r.statistic, r.dof);
  return r;
}

}  // namespace kslab
