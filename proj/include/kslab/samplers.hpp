#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "kslab/errors.hpp"
#include "kslab/fluid.hpp"
#include "kslab/graph.hpp"
#include "kslab/rng.hpp"

namespace kslab {

namespace detail {

// Open-addressing set of vertex pairs. Clearing is O(1) via generation stamps,
// which matters because rejection samplers reset it once per attempt.
class PairSet {
 public:
  void reset(std::size_t expected) {
    std::size_t cap = 16;
    while (cap < 2 * expected + 2) cap <<= 1;
    if (cap > keys_.size()) {
      keys_.assign(cap, 0);
      stamps_.assign(cap, 0);
      generation_ = 0;
    }
    if (++generation_ == 0) {
      std::fill(stamps_.begin(), stamps_.end(), 0);
      generation_ = 1;
    }
    mask_ = keys_.size() - 1;
  }

  /// Inserts {a,b}; returns false if it was already present.
  bool insert(Vertex a, Vertex b) {
    if (a > b) std::swap(a, b);
    const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
    for (std::size_t i = mix64(key) & mask_;; i = (i + 1) & mask_) {
      if (stamps_[i] != generation_) {
        stamps_[i] = generation_;
        keys_[i] = key;
        return true;
      }
      if (keys_[i] == key) return false;
    }
  }

 private:
  std::vector<std::uint64_t> keys_;
  std::vector<std::uint32_t> stamps_;
  std::uint32_t generation_ = 0;
  std::size_t mask_ = 0;
};

inline std::vector<Vertex> half_edge_array(const std::vector<std::uint32_t>& degrees) {
  std::uint64_t total = 0;
  for (auto d : degrees) total += d;
  require(total % 2 == 0, ErrorCode::kOddDegreeSum, "degree sum " + std::to_string(total) + " is odd");
  std::vector<Vertex> half;
  half.reserve(total);
  for (Vertex v = 0; v < degrees.size(); ++v) half.insert(half.end(), degrees[v], v);
  return half;
}

// Pairs slot i with a uniform remaining slot. Repeating this for i = 0, 2, 4, ...
// produces a uniform perfect matching whatever the initial arrangement.
inline std::pair<Vertex, Vertex> pair_next(std::vector<Vertex>& half, std::size_t i, Rng& rng) {
  const std::size_t j = i + 1 + uniform_index(rng, half.size() - i - 1);
  std::swap(half[i + 1], half[j]);
  return {half[i], half[i + 1]};
}

// log z^d/d! over the truncated support d >= 2, restricted to the window where
// the mass is above 1e-40 of the peak. Outside the window the law is zero to
// double precision at every size this library runs.
struct TruncatedPoissonTable {
  std::uint32_t lo = 2;
  std::vector<double> prob;  // prob[i] = P(d = lo + i)

  explicit TruncatedPoissonTable(double z) {
    if (z <= 0) {
      prob = {1.0};
      return;
    }
    const double logz = std::log(z);
    auto logw = [&](double d) { return d * logz - std::lgamma(d + 1); };
    const double mode = std::max(2.0, std::floor(z));
    const double peak = logw(mode);
    const double cut = std::log(1e-40);
    std::uint32_t a = static_cast<std::uint32_t>(mode), b = a;
    while (a > 2 && logw(a - 1) - peak > cut) --a;
    while (logw(b + 1) - peak > cut) ++b;
    lo = a;
    prob.resize(b - a + 1);
    double total = 0;
    for (std::uint32_t d = a; d <= b; ++d) total += prob[d - a] = std::exp(logw(d) - peak);
    for (auto& p : prob) p /= total;
  }
};

}  // namespace detail

/// Multigraph law G(n,m): every endpoint of every edge is uniform and independent.
inline Multigraph sample_uniform_multigraph(std::size_t n, std::size_t m, Rng& rng) {
  require(n >= 1, ErrorCode::kInvalidArgument, "n must be at least 1");
  Multigraph g(n);
  g.reserve_edges(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto a = static_cast<Vertex>(uniform_index(rng, n));
    const auto b = static_cast<Vertex>(uniform_index(rng, n));
    g.add_edge(a, b);
  }
  return g;
}

struct SimpleGnmOptions {
  std::uint64_t max_attempts = 10'000'000;
};

struct SimpleGnmSample {
  Multigraph graph;
  std::uint64_t attempts = 0;
};

/// Uniform simple graph with m edges, by rejection from the multigraph law.
/// An attempt is abandoned at its first loop or repeated pair; the accepted
/// edge sequence has exactly the conditioned law.
inline SimpleGnmSample sample_simple_gnm_counted(std::size_t n, std::size_t m, Rng& rng,
                                                 const SimpleGnmOptions& options = {}) {
  require(n >= 1, ErrorCode::kInvalidArgument, "n must be at least 1");
  require(static_cast<double>(m) <= 0.5 * static_cast<double>(n) * (static_cast<double>(n) - 1),
          ErrorCode::kInvalidArgument, "m exceeds n(n-1)/2");
  detail::PairSet seen;
  std::vector<Edge> edges(m);
  for (std::uint64_t attempt = 1; attempt <= options.max_attempts; ++attempt) {
    seen.reset(m);
    bool ok = true;
    for (std::size_t i = 0; i < m && ok; ++i) {
      const auto a = static_cast<Vertex>(uniform_index(rng, n));
      const auto b = static_cast<Vertex>(uniform_index(rng, n));
      ok = a != b && seen.insert(a, b);
      edges[i] = {a, b};
    }
    if (!ok) continue;
    SimpleGnmSample out{Multigraph(n), attempt};
    out.graph.reserve_edges(m);
    for (const auto& e : edges) out.graph.add_edge(e.u, e.v);
    return out;
  }
  throw Error(ErrorCode::kRejectionBudgetExhausted,
              "no simple graph after " + std::to_string(options.max_attempts) + " attempts");
}

inline Multigraph sample_simple_gnm(std::size_t n, std::size_t m, Rng& rng, const SimpleGnmOptions& options = {}) {
  return sample_simple_gnm_counted(n, m, rng, options).graph;
}

/// Uniform pairing of half-edges; vertex i gets degrees[i] half-edges.
inline Multigraph sample_configuration_model(const std::vector<std::uint32_t>& degrees, Rng& rng) {
  auto half = detail::half_edge_array(degrees);
  Multigraph g(degrees.size());
  g.reserve_edges(half.size() / 2);
  for (std::size_t i = 0; i < half.size(); i += 2) {
    auto [a, b] = detail::pair_next(half, i, rng);
    g.add_edge(a, b);
  }
  return g;
}

/// Repeated simplicity trials of one configuration model. Each trial pairs
/// half-edges only until the first loop or repeated pair, so the outcome has
/// the law of is_simple(sample_configuration_model(degrees)).
class ConfigurationSimplicityTester {
 public:
  explicit ConfigurationSimplicityTester(const std::vector<std::uint32_t>& degrees)
      : half_(detail::half_edge_array(degrees)) {}

  bool trial(Rng& rng) {
    seen_.reset(half_.size() / 2);
    for (std::size_t i = 0; i < half_.size(); i += 2) {
      auto [a, b] = detail::pair_next(half_, i, rng);
      if (a == b || !seen_.insert(a, b)) return false;
    }
    return true;
  }

 private:
  std::vector<Vertex> half_;
  detail::PairSet seen_;
};

inline bool configuration_model_is_simple(const std::vector<std::uint32_t>& degrees, Rng& rng) {
  return ConfigurationSimplicityTester(degrees).trial(rng);
}

/// Poisson(z) conditioned on being at least 2. Small z uses inversion since
/// plain rejection accepts with probability about z^2/2.
inline std::uint32_t sample_truncated_poisson(double z, Rng& rng) {
  require(z >= 0 && std::isfinite(z), ErrorCode::kInvalidArgument, "z must be finite and nonnegative");
  if (z < 2.0) {
    // weights relative to d = 2: w_{d+1} = w_d z/(d+1)
    double total = 0, w = 1;
    for (std::uint32_t d = 2; w > 1e-18 * total || d == 2; ++d, w *= z / d) total += w;
    double u = uniform01(rng) * total;
    w = 1;
    std::uint32_t d = 2;
    while (u >= w && w > 0) {
      u -= w;
      ++d;
      w *= z / d;
    }
    return d;
  }
  std::poisson_distribution<std::uint32_t> poisson(z);
  for (;;) {
    const auto d = poisson(rng);
    if (d >= 2) return d;
  }
}

struct HeavyDegreeOptions {
  std::uint64_t max_rejection_attempts = 1'000'000;
  std::uint64_t small_v_threshold = 64;
  double max_dp_operations = 2e8;
  double max_dp_cells = 2e7;
};

namespace detail {

// Exact sequential sampler: W[j][t] is the (row-rescaled) total weight of
// j vertices with excess summing to t.
inline bool heavy_counts_by_dp(std::uint64_t v, std::uint64_t s, double z, const HeavyDegreeOptions& options,
                               Rng& rng, std::vector<std::uint64_t>& counts) {
  const double logz = std::log(z);
  auto logw = [&](double e) { return (e + 2) * logz - std::lgamma(e + 3); };
  double peak = -std::numeric_limits<double>::infinity();
  for (std::uint64_t e = 0; e <= s; ++e) {
    const double lw = logw(static_cast<double>(e));
    if (lw < peak) break;
    peak = lw;
  }
  std::vector<double> w;
  for (std::uint64_t e = 0; e <= s; ++e) {
    const double r = std::exp(logw(static_cast<double>(e)) - peak);
    if (r < 1e-300 && static_cast<double>(e) > z) break;
    w.push_back(r);
  }
  const std::uint64_t emax = w.size() - 1;
  const double cells = static_cast<double>(v + 1) * static_cast<double>(s + 1);
  if (cells > options.max_dp_cells || cells * static_cast<double>(emax + 1) > options.max_dp_operations) return false;

  const std::size_t width = s + 1;
  std::vector<double> table((v + 1) * width, 0.0);
  table[0] = 1.0;
  for (std::uint64_t j = 1; j <= v; ++j) {
    const double* prev = &table[(j - 1) * width];
    double* row = &table[j * width];
    double top = 0;
    for (std::uint64_t t = 0; t <= s; ++t) {
      double acc = 0;
      for (std::uint64_t e = 0; e <= std::min(t, emax); ++e) acc += w[e] * prev[t - e];
      row[t] = acc;
      top = std::max(top, acc);
    }
    if (top > 0) {
      for (std::uint64_t t = 0; t <= s; ++t) row[t] /= top;
    }
  }
  require(table[v * width + s] > 0, ErrorCode::kInfeasibleTriple, "degree constraint has no admissible solution");

  std::uint64_t target = s;
  std::vector<double> cdf;
  for (std::uint64_t j = v; j >= 1; --j) {
    const double* rest = &table[(j - 1) * width];
    cdf.clear();
    double total = 0;
    for (std::uint64_t e = 0; e <= std::min(target, emax); ++e) cdf.push_back(total += w[e] * rest[target - e]);
    const double u = uniform01(rng) * total;
    const auto e = static_cast<std::uint64_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const std::uint64_t pick = std::min<std::uint64_t>(e, cdf.size() - 1);
    if (counts.size() <= pick + 2) counts.resize(pick + 3, 0);
    ++counts[pick + 2];
    target -= pick;
  }
  return true;
}

// Multinomial draw of the histogram of v iid truncated-Poisson(z) degrees,
// accepted iff the total excess is s. Same law as drawing v variates and
// rejecting on the sum, at O(support) cost per attempt.
inline bool heavy_counts_by_rejection(std::uint64_t v, std::uint64_t s, double z, std::uint64_t attempts, Rng& rng,
                                      std::vector<std::uint64_t>& counts) {
  const TruncatedPoissonTable table(z);
  const std::size_t k = table.prob.size();
  std::vector<double> tail(k + 1, 0.0);
  for (std::size_t i = k; i-- > 0;) tail[i] = tail[i + 1] + table.prob[i];
  std::vector<std::uint64_t> draw(k);
  for (std::uint64_t a = 0; a < attempts; ++a) {
    std::uint64_t remaining = v, excess = 0;
    bool ok = true;
    for (std::size_t i = 0; i < k && ok; ++i) {
      std::uint64_t c = remaining;
      if (i + 1 < k && remaining > 0) {
        const double p = std::min(1.0, table.prob[i] / tail[i]);
        c = std::binomial_distribution<std::uint64_t>(remaining, p)(rng);
      }
      draw[i] = c;
      remaining -= c;
      excess += c * (table.lo + i - 2);
      ok = excess <= s;
    }
    if (!ok || excess != s) continue;
    counts.assign(table.lo + k, 0);
    for (std::size_t i = 0; i < k; ++i) counts[table.lo + i] = draw[i];
    return true;
  }
  return false;
}

}  // namespace detail

/// Histogram (index = degree) of v heavy degrees, iid Poisson(z) conditioned
/// on d >= 2 and on total excess sum(d - 2) = s. The law does not depend on z;
/// z = z(v,s) only makes rejection efficient.
inline std::vector<std::uint64_t> sample_heavy_degree_counts(std::uint64_t v, std::uint64_t s, Rng& rng,
                                                             const HeavyDegreeOptions& options = {}) {
  require(v > 0 || s == 0, ErrorCode::kInfeasibleTriple, "positive surplus needs a heavy vertex");
  std::vector<std::uint64_t> counts;
  if (v == 0) return counts;
  if (s == 0) {
    counts.assign(3, 0);
    counts[2] = v;
    return counts;
  }
  const double z = solve_z(static_cast<double>(v), static_cast<double>(s));
  if (v < options.small_v_threshold && detail::heavy_counts_by_dp(v, s, z, options, rng, counts)) return counts;
  if (detail::heavy_counts_by_rejection(v, s, z, options.max_rejection_attempts, rng, counts)) return counts;
  if (detail::heavy_counts_by_dp(v, s, z, options, rng, counts)) return counts;
  throw Error(ErrorCode::kRejectionBudgetExhausted,
              "heavy degree sampling failed for v=" + std::to_string(v) + ", s=" + std::to_string(s));
}

/// Per-vertex degree list of G(x,v,s): x leaves, then v heavy vertices in
/// exchangeable random order.
inline std::vector<std::uint32_t> sample_constrained_degrees(std::uint64_t x, std::uint64_t v, std::uint64_t s,
                                                             Rng& rng, const HeavyDegreeOptions& options = {}) {
  require((x + s) % 2 == 0, ErrorCode::kParityViolation, "x + 2v + s must be even");
  require(v > 0 || s == 0, ErrorCode::kInfeasibleTriple, "v = 0 requires s = 0");
  const auto counts = sample_heavy_degree_counts(v, s, rng, options);
  std::vector<std::uint32_t> degrees(x, 1);
  degrees.reserve(x + v);
  for (std::uint32_t d = 2; d < counts.size(); ++d) degrees.insert(degrees.end(), counts[d], d);
  std::shuffle(degrees.begin() + static_cast<std::ptrdiff_t>(x), degrees.end(), rng);
  return degrees;
}

/// Uniform multigraph with x leaves, v vertices of degree >= 2 and surplus s.
inline Multigraph sample_constrained_multigraph(std::uint64_t x, std::uint64_t v, std::uint64_t s, Rng& rng,
                                                const HeavyDegreeOptions& options = {}) {
  return sample_configuration_model(sample_constrained_degrees(x, v, s, rng, options), rng);
}

}  // namespace kslab
