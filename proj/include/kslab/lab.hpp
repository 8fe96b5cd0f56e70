#pragma once

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kslab/errors.hpp"
#include "kslab/fluid.hpp"
#include "kslab/graph.hpp"
#include "kslab/parallel.hpp"
#include "kslab/peeler.hpp"
#include "kslab/rng.hpp"
#include "kslab/samplers.hpp"
#include "kslab/stats.hpp"

namespace kslab {

enum class ExperimentMode { kCriticalFixedM, kBinomialP, kLambdaSweep };

inline std::string to_string(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::kCriticalFixedM: return "critical-fixed-m";
    case ExperimentMode::kBinomialP: return "binomial-p";
    case ExperimentMode::kLambdaSweep: return "lambda-sweep";
  }
  return "unknown";
}

inline ExperimentMode parse_mode(const std::string& s) {
  if (s == "critical-fixed-m") return ExperimentMode::kCriticalFixedM;
  if (s == "binomial-p") return ExperimentMode::kBinomialP;
  if (s == "lambda-sweep") return ExperimentMode::kLambdaSweep;
  throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + s + "'");
}

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::kCriticalFixedM;
  std::vector<std::uint64_t> n_values;
  double lambda = kE;
  std::vector<double> lambda_values;  // lambda-sweep only
  std::uint64_t n_trials = 1;
  std::uint64_t master_seed = 1;
  double dt_theta = 1e-4;
  std::string output_path;
  bool simple = false;  // condition G(n,m) on simplicity
  bool record_fluctuations = false;
  std::string trace_dir;  // when set, per-trial traces are written here
  unsigned threads = default_threads();
};

inline void validate(const ExperimentConfig& c) {
  require(!c.n_values.empty(), ErrorCode::kInvalidArgument, "n_values is empty");
  for (std::size_t i = 0; i < c.n_values.size(); ++i) {
    require(c.n_values[i] >= 1, ErrorCode::kInvalidArgument, "n must be positive");
    require(i == 0 || c.n_values[i] > c.n_values[i - 1], ErrorCode::kInvalidArgument, "n_values must increase");
  }
  require(c.n_trials >= 1, ErrorCode::kInvalidArgument, "n_trials must be at least 1");
  require(c.lambda > 0, ErrorCode::kInvalidArgument, "lambda must be positive");
  if (c.mode == ExperimentMode::kLambdaSweep) {
    require(!c.lambda_values.empty(), ErrorCode::kInvalidArgument, "lambda-sweep needs lambda_values");
    for (double l : c.lambda_values) require(l > 0, ErrorCode::kInvalidArgument, "lambda must be positive");
  }
  require(c.dt_theta > 0, ErrorCode::kInvalidArgument, "dt_theta must be positive");
  require(c.threads >= 1, ErrorCode::kInvalidArgument, "threads must be at least 1");
}

inline std::vector<double> experiment_lambdas(const ExperimentConfig& c) {
  return c.mode == ExperimentMode::kLambdaSweep ? c.lambda_values : std::vector<double>{c.lambda};
}

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(s, &used);
  } catch (...) {
    used = 0;
  }
  if (s == "e") return kE;
  require(used == s.size() && !s.empty(), ErrorCode::kInvalidArgument, "not a number: '" + s + "'");
  return x;
}

inline std::uint64_t parse_u64(const std::string& s) {
  std::size_t used = 0;
  std::uint64_t x = 0;
  try {
    x = std::stoull(s, &used);
  } catch (...) {
    used = 0;
  }
  if (used != s.size() || s.empty() || s[0] == '-') {
    // accept exact powers written as 2^k or in scientific notation
    if (auto caret = s.find('^'); caret != std::string::npos) {
      const auto base = parse_u64(s.substr(0, caret));
      const auto exponent = parse_u64(s.substr(caret + 1));
      double v = std::pow(static_cast<double>(base), static_cast<double>(exponent));
      require(v < 1.8e19, ErrorCode::kInvalidArgument, "integer overflow: '" + s + "'");
      return static_cast<std::uint64_t>(std::llround(v));
    }
    const double d = parse_double(s);
    require(d >= 0 && d == std::floor(d) && d < 1.8e19, ErrorCode::kInvalidArgument, "not a count: '" + s + "'");
    return static_cast<std::uint64_t>(d);
  }
  return x;
}

inline bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw Error(ErrorCode::kInvalidArgument, "not a boolean: '" + s + "'");
}

}  // namespace detail

/// Sets one configuration key from its text value.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "mode") {
    c.mode = parse_mode(value);
  } else if (key == "n_values") {
    c.n_values.clear();
    for (const auto& item : split(value, ',')) c.n_values.push_back(parse_u64(item));
  } else if (key == "lambda") {
    c.lambda = parse_double(value);
  } else if (key == "lambda_values") {
    c.lambda_values.clear();
    for (const auto& item : split(value, ',')) c.lambda_values.push_back(parse_double(item));
  } else if (key == "n_trials") {
    c.n_trials = parse_u64(value);
  } else if (key == "master_seed" || key == "seed") {
    c.master_seed = parse_u64(value);
  } else if (key == "dt_theta") {
    c.dt_theta = parse_double(value);
  } else if (key == "output_path" || key == "output") {
    c.output_path = value;
  } else if (key == "simple") {
    c.simple = parse_bool(value);
  } else if (key == "record_fluctuations") {
    c.record_fluctuations = parse_bool(value);
  } else if (key == "trace_dir") {
    c.trace_dir = value;
  } else if (key == "threads") {
    c.threads = static_cast<unsigned>(parse_u64(value));
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
  }
}

/// Reads "key = value" lines; '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kInvalidArgument,
            "config line " + std::to_string(lineno) + " is not 'key = value'");
    set_config_value(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return base;
}

inline ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open config file " + path);
  return parse_config(in, std::move(base));
}

/// The resolved configuration, one "key = value" per entry, defaults included.
inline std::vector<std::string> config_lines(const ExperimentConfig& c) {
  using detail::format_double;
  return {
      "mode = " + to_string(c.mode),
      "n_values = " + detail::join(c.n_values),
      "lambda = " + format_double(c.lambda),
      "lambda_values = " + detail::join(c.lambda_values),
      "n_trials = " + std::to_string(c.n_trials),
      "master_seed = " + std::to_string(c.master_seed),
      "dt_theta = " + format_double(c.dt_theta),
      "output_path = " + c.output_path,
      "simple = " + std::string(c.simple ? "true" : "false"),
      "record_fluctuations = " + std::string(c.record_fluctuations ? "true" : "false"),
      "trace_dir = " + c.trace_dir,
      "threads = " + std::to_string(c.threads),
  };
}

inline std::uint64_t edges_for(double lambda, std::uint64_t n) {
  return static_cast<std::uint64_t>(std::llround(lambda * static_cast<double>(n) / 2.0));
}

inline std::uint64_t trial_seed(std::uint64_t master, double lambda, std::uint64_t n, std::uint64_t trial) {
  return derive_seed(master, {std::bit_cast<std::uint64_t>(lambda), n, trial});
}

/// Rescaled extinction margin (t* n - theta) / n^{3/5}.
inline double empirical_t_theta(std::int64_t extinction_step, std::uint64_t n) {
  const double nd = static_cast<double>(n);
  return (kTStar * nd - static_cast<double>(extinction_step)) / std::pow(nd, 0.6);
}

struct TrialResult {
  double lambda = kE;
  std::uint64_t n = 0;
  std::uint64_t m = 0;
  std::uint64_t trial = 0;
  std::uint64_t seed = 0;
  CoreSummary core;
  std::int64_t extinction_step = 0;
  double t_theta = 0;
  std::uint64_t isolated_start = 0;
  std::uint64_t peeled = 0;
  // Filled when fluctuations are recorded, NaN otherwise.
  double max_abs_a = std::numeric_limits<double>::quiet_NaN();
  double max_abs_b = std::numeric_limits<double>::quiet_NaN();
  double max_abs_c = std::numeric_limits<double>::quiet_NaN();
  double fluid_sup_x = std::numeric_limits<double>::quiet_NaN();

  bool operator==(const TrialResult& o) const {
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return same(lambda, o.lambda) && n == o.n && m == o.m && trial == o.trial && seed == o.seed && core == o.core &&
           extinction_step == o.extinction_step && same(t_theta, o.t_theta) && isolated_start == o.isolated_start &&
           peeled == o.peeled && same(max_abs_a, o.max_abs_a) && same(max_abs_b, o.max_abs_b) &&
           same(max_abs_c, o.max_abs_c) && same(fluid_sup_x, o.fluid_sup_x);
  }

  double core_fraction() const { return static_cast<double>(core.n_core_vertices) / static_cast<double>(n); }
};

/// Closed-form fluid values at k/n for k = 0..floor(t* n), shared by all
/// trials of one n.
class FluidTable {
 public:
  explicit FluidTable(std::uint64_t n) : n_(n) {
    const auto last = static_cast<std::size_t>(std::floor(kTStar * static_cast<double>(n)));
    x_.resize(last + 1);
    v_.resize(last + 1);
    s_.resize(last + 1);
    for (std::size_t k = 0; k <= last; ++k) {
      const auto st = fluid_at_time(std::min(kTStar, static_cast<double>(k) / static_cast<double>(n)));
      x_[k] = st.x;
      v_[k] = st.v;
      s_[k] = st.s;
    }
  }
  std::uint64_t n() const { return n_; }
  std::size_t size() const { return x_.size(); }
  double x(std::size_t k) const { return x_[k]; }
  double v(std::size_t k) const { return v_[k]; }
  double s(std::size_t k) const { return s_[k]; }

 private:
  std::uint64_t n_;
  std::vector<double> x_, v_, s_;
};

struct FluctuationTrace {
  std::vector<std::int64_t> k;
  std::vector<double> eps, a, b, c;
};

/// Smallest epsilon at which rescaled fluctuations are reported.
inline double fluctuation_eps_floor(std::uint64_t n) {
  return std::pow(static_cast<double>(n), -2.0 / 5.0 - 1.0 / 100.0);
}

inline FluctuationTrace rescale_fluctuations(const KsTrace& trace, const FluidTable& fluid) {
  require(!trace.steps.empty(), ErrorCode::kTraceTooShort, "trace has no recorded steps");
  const std::uint64_t n = fluid.n();
  const double nd = static_cast<double>(n), rn = std::sqrt(nd);
  const double floor_eps = fluctuation_eps_floor(n);
  FluctuationTrace out;
  for (std::size_t k = 0; k < trace.steps.size() && k < fluid.size(); ++k) {
    const double eps = (kTStar * nd - static_cast<double>(k)) / nd;
    if (eps < floor_eps) break;
    const auto& st = trace.steps[k];
    out.k.push_back(static_cast<std::int64_t>(k));
    out.eps.push_back(eps);
    out.a.push_back((static_cast<double>(st.x) - nd * fluid.x(k)) / (std::pow(eps, 0.75) * rn));
    out.b.push_back((static_cast<double>(st.v) - nd * fluid.v(k)) / rn);
    out.c.push_back((static_cast<double>(st.s) - nd * fluid.s(k)) / (std::sqrt(eps) * rn));
  }
  return out;
}

inline FluctuationTrace rescale_fluctuations(const KsTrace& trace, std::uint64_t n) {
  return rescale_fluctuations(trace, FluidTable(n));
}

/// sup over k <= fraction t* n of |X_k/n - X(k/n)|.
inline double fluid_sup_deviation_x(const KsTrace& trace, const FluidTable& fluid, double fraction = 0.9) {
  const double nd = static_cast<double>(fluid.n());
  const auto last = static_cast<std::size_t>(std::floor(fraction * kTStar * nd));
  double sup = 0;
  for (std::size_t k = 0; k <= last && k < trace.steps.size() && k < fluid.size(); ++k) {
    sup = std::max(sup, std::abs(static_cast<double>(trace.steps[k].x) / nd - fluid.x(k)));
  }
  return sup;
}

struct IncrementStats {
  double mean = 0;
  double variance = 0;
  double mean_se = 0;  // batch-means standard error across traces
};

struct DriftVarianceEstimate {
  IncrementStats dx, dv, ds;
  std::size_t n_increments = 0;
  std::size_t n_traces = 0;
  // fluid references for the window eps_k in [eps, 2 eps]
  double z_reference = 0;        // z(V(t*-eps) n, S(t*-eps) n)
  double phi_a_reference = 0;    // fluid drift averaged over the window
  double phi_b_reference = 0;
  double phi_c_reference = 0;
};

/// Pools one-step increments over eps_k in [eps, 2 eps] across traces.
inline DriftVarianceEstimate estimate_local_drift_variance(const std::vector<const KsTrace*>& traces, std::uint64_t n,
                                                           double eps) {
  const double nd = static_cast<double>(n);
  require(eps >= std::cbrt(1.0 / nd) && eps <= 0.3, ErrorCode::kInvalidArgument, "eps must lie in [n^{-1/3}, 0.3]");
  require(traces.size() >= 30, ErrorCode::kInsufficientData, "need at least 30 traces");
  const auto k_lo = static_cast<std::int64_t>(std::ceil((kTStar - 2 * eps) * nd));
  const auto k_hi = static_cast<std::int64_t>(std::floor((kTStar - eps) * nd));

  DriftVarianceEstimate out;
  out.n_traces = traces.size();
  struct Acc {
    double sum = 0, sq = 0;
    std::vector<double> trace_means;
  } ax, av, as;
  std::size_t total = 0;
  for (const KsTrace* tr : traces) {
    require(tr != nullptr && !tr->steps.empty(), ErrorCode::kTraceTooShort, "trace has no recorded steps");
    double tx = 0, tv = 0, ts = 0;
    std::size_t count = 0;
    for (std::int64_t k = std::max<std::int64_t>(k_lo, 0); k <= k_hi; ++k) {
      if (static_cast<std::size_t>(k + 1) >= tr->steps.size()) break;
      const auto& p = tr->steps[k];
      const auto& q = tr->steps[k + 1];
      const double dx = static_cast<double>(q.x - p.x), dv = static_cast<double>(q.v - p.v),
                   ds = static_cast<double>(q.s - p.s);
      ax.sum += dx, ax.sq += dx * dx, tx += dx;
      av.sum += dv, av.sq += dv * dv, tv += dv;
      as.sum += ds, as.sq += ds * ds, ts += ds;
      ++count;
    }
    if (count > 0) {
      ax.trace_means.push_back(tx / static_cast<double>(count));
      av.trace_means.push_back(tv / static_cast<double>(count));
      as.trace_means.push_back(ts / static_cast<double>(count));
    }
    total += count;
  }
  require(total >= 2 && ax.trace_means.size() >= 2, ErrorCode::kInsufficientData, "no increments in the window");
  out.n_increments = total;
  auto finish = [&](const Acc& a) {
    IncrementStats st;
    const double t = static_cast<double>(total);
    st.mean = a.sum / t;
    st.variance = (a.sq - t * st.mean * st.mean) / (t - 1);
    st.mean_se = moments(a.trace_means).std_error;
    return st;
  };
  out.dx = finish(ax);
  out.dv = finish(av);
  out.ds = finish(as);

  const auto near = fluid_at_time(kTStar - eps), far = fluid_at_time(kTStar - 2 * eps);
  out.z_reference = solve_z(near.v * nd, near.s * nd);
  out.phi_a_reference = (near.x - far.x) / eps;
  out.phi_b_reference = (near.v - far.v) / eps;
  out.phi_c_reference = (near.s - far.s) / eps;
  return out;
}

namespace detail {

inline Multigraph sample_trial_graph(const ExperimentConfig& c, double lambda, std::uint64_t n, Rng& rng) {
  if (c.mode == ExperimentMode::kBinomialP) {
    // G(n, p) with p = lambda/n: binomial edge count, then uniform simple graph.
    const double pairs = 0.5 * static_cast<double>(n) * (static_cast<double>(n) - 1);
    const double p = std::min(1.0, lambda / static_cast<double>(n));
    const auto m = std::binomial_distribution<std::uint64_t>(static_cast<std::uint64_t>(pairs), p)(rng);
    return sample_simple_gnm(n, m, rng);
  }
  const auto m = edges_for(lambda, n);
  return c.simple ? sample_simple_gnm(n, m, rng) : sample_uniform_multigraph(n, m, rng);
}

}  // namespace detail

using TraceSink = std::function<void(std::size_t index, const TrialResult&, const KsTrace&)>;

/// One trial: sample, peel, summarize.
inline TrialResult run_trial(const ExperimentConfig& c, double lambda, std::uint64_t n, std::uint64_t trial,
                             const FluidTable* fluid, bool need_trace, KsTrace* trace_out = nullptr) {
  TrialResult r;
  r.lambda = lambda;
  r.n = n;
  r.trial = trial;
  r.seed = trial_seed(c.master_seed, lambda, n, trial);
  Rng rng = make_rng(r.seed);
  Multigraph g = detail::sample_trial_graph(c, lambda, n, rng);
  r.m = g.n_alive_edges();
  const bool record = need_trace || c.record_fluctuations || !c.trace_dir.empty();
  KsRun run = run_karp_sipser(std::move(g), rng, record);
  r.core = core_summary(run.core);
  r.extinction_step = run.trace.extinction_step;
  r.t_theta = empirical_t_theta(r.extinction_step, n);
  r.isolated_start = run.isolated_at_start;
  r.peeled = run.vertices_peeled;
  if (c.record_fluctuations && fluid != nullptr) {
    const auto fl = rescale_fluctuations(run.trace, *fluid);
    auto max_abs = [](const std::vector<double>& xs) {
      double m = 0;
      for (double x : xs) m = std::max(m, std::abs(x));
      return m;
    };
    r.max_abs_a = max_abs(fl.a);
    r.max_abs_b = max_abs(fl.b);
    r.max_abs_c = max_abs(fl.c);
    r.fluid_sup_x = fluid_sup_deviation_x(run.trace, *fluid);
  }
  if (!c.trace_dir.empty()) {
    std::filesystem::create_directories(c.trace_dir);
    const auto path = std::filesystem::path(c.trace_dir) /
                      ("trace_l" + detail::format_double(lambda) + "_n" + std::to_string(n) + "_t" +
                       std::to_string(trial) + ".csv");
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
    write_trace_csv(run.trace, out);
  }
  if (trace_out) *trace_out = std::move(run.trace);
  return r;
}

inline constexpr int kResultsSchemaVersion = 1;
inline constexpr const char* kResultsSchemaName = "kslab-results";
inline constexpr const char* kResultsColumns =
    "lambda,n,m,trial,seed,D2,D3,D4,D5,D6plus,core_vertices,core_edges,theta_step,t_theta,simple_flag,"
    "isolated_start,peeled,max_abs_a,max_abs_b,max_abs_c,fluid_sup_x,degree_tail";

inline void write_results(const std::vector<TrialResult>& results, std::ostream& out,
                          const std::vector<std::string>& header_lines = {}) {
  using detail::format_double;
  out << "# schema: " << kResultsSchemaName << '/' << kResultsSchemaVersion << '\n';
  for (const auto& line : header_lines) out << "# " << line << '\n';
  out << kResultsColumns << '\n';
  for (const auto& r : results) {
    std::string tail;
    for (auto it = r.core.degree_counts.lower_bound(6); it != r.core.degree_counts.end(); ++it) {
      if (!tail.empty()) tail += ';';
      tail += std::to_string(it->first) + ':' + std::to_string(it->second);
    }
    out << format_double(r.lambda) << ',' << r.n << ',' << r.m << ',' << r.trial << ',' << r.seed << ','
        << r.core.count(2) << ',' << r.core.count(3) << ',' << r.core.count(4) << ',' << r.core.count(5) << ','
        << r.core.count_at_least(6) << ',' << r.core.n_core_vertices << ',' << r.core.n_core_edges << ','
        << r.extinction_step << ',' << format_double(r.t_theta) << ',' << (r.core.is_simple_core ? 1 : 0) << ','
        << r.isolated_start << ',' << r.peeled << ',' << format_double(r.max_abs_a) << ','
        << format_double(r.max_abs_b) << ',' << format_double(r.max_abs_c) << ',' << format_double(r.fluid_sup_x)
        << ',' << tail << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "failed writing results");
}

inline void write_results(const std::vector<TrialResult>& results, const std::string& path,
                          const std::vector<std::string>& header_lines = {}) {
  std::ostringstream buffer;
  write_results(results, buffer, header_lines);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path + " for writing");
  out << buffer.str();
  if (!out) throw Error(ErrorCode::kIoFailure, "failed writing " + path);
}

inline std::vector<TrialResult> read_results(std::istream& in) {
  using namespace detail;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kSchemaMismatch, "missing schema line");
  const std::string prefix = std::string("# schema: ") + kResultsSchemaName + "/";
  if (line.rfind(prefix, 0) != 0) throw Error(ErrorCode::kSchemaMismatch, "unrecognized schema line: " + line);
  int version = 0;
  try {
    version = std::stoi(line.substr(prefix.size()));
  } catch (...) {
    throw Error(ErrorCode::kSchemaMismatch, "unreadable schema version: " + line);
  }
  if (version != kResultsSchemaVersion) {
    throw Error(ErrorCode::kSchemaMismatch, "results schema version " + std::to_string(version) +
                                                " is not supported (expected " +
                                                std::to_string(kResultsSchemaVersion) + ")");
  }
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
  }
  if (trim(line) != kResultsColumns) throw Error(ErrorCode::kSchemaMismatch, "unexpected column header: " + line);
  std::vector<TrialResult> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 22) throw Error(ErrorCode::kIoFailure, "malformed results row: " + line);
    TrialResult r;
    try {
      r.lambda = std::stod(f[0]);
      r.n = parse_u64(f[1]);
      r.m = parse_u64(f[2]);
      r.trial = parse_u64(f[3]);
      r.seed = std::stoull(f[4]);
      for (std::uint32_t d = 2; d <= 5; ++d) {
        const auto c = parse_u64(f[3 + d]);
        if (c) r.core.degree_counts[d] = c;
      }
      r.core.n_core_vertices = parse_u64(f[10]);
      r.core.n_core_edges = parse_u64(f[11]);
      r.extinction_step = std::stoll(f[12]);
      r.t_theta = std::stod(f[13]);
      r.core.is_simple_core = f[14] == "1";
      r.isolated_start = parse_u64(f[15]);
      r.peeled = parse_u64(f[16]);
      r.max_abs_a = std::stod(f[17]);
      r.max_abs_b = std::stod(f[18]);
      r.max_abs_c = std::stod(f[19]);
      r.fluid_sup_x = std::stod(f[20]);
      if (!f[21].empty()) {
        for (const auto& item : split(f[21], ';')) {
          const auto colon = item.find(':');
          if (colon == std::string::npos) throw Error(ErrorCode::kIoFailure, "malformed degree tail: " + f[21]);
          r.core.degree_counts[static_cast<std::uint32_t>(parse_u64(item.substr(0, colon)))] =
              parse_u64(item.substr(colon + 1));
        }
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorCode::kIoFailure, "malformed results row: " + line);
    }
    const auto d6 = parse_u64(f[9]);
    if (r.core.count_at_least(6) != d6) throw Error(ErrorCode::kIoFailure, "degree tail disagrees with D6plus");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<TrialResult> read_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path);
  return read_results(in);
}

/// All (lambda, n, trial) combinations in a fixed order; each trial's stream
/// is derived from (master_seed, lambda, n, trial), so the output does not
/// depend on thread count or completion order.
inline std::vector<TrialResult> run_critical_experiment(const ExperimentConfig& c, const TraceSink& sink = {}) {
  validate(c);
  struct Job {
    double lambda;
    std::uint64_t n, trial;
  };
  std::vector<Job> jobs;
  for (double lambda : experiment_lambdas(c)) {
    for (auto n : c.n_values) {
      for (std::uint64_t t = 0; t < c.n_trials; ++t) jobs.push_back({lambda, n, t});
    }
  }
  std::map<std::uint64_t, std::unique_ptr<FluidTable>> tables;
  if (c.record_fluctuations) {
    for (auto n : c.n_values) tables[n] = std::make_unique<FluidTable>(n);
  }
  std::vector<TrialResult> results(jobs.size());
  parallel_for(jobs.size(), c.threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    const FluidTable* fluid = c.record_fluctuations ? tables.at(job.n).get() : nullptr;
    KsTrace trace;
    results[i] = run_trial(c, job.lambda, job.n, job.trial, fluid, static_cast<bool>(sink), &trace);
    if (sink) sink(i, results[i], trace);
  });
  if (!c.output_path.empty()) write_results(results, c.output_path, config_lines(c));
  return results;
}

/// Per-(lambda, n) means, log-log slopes of the mean core degree counts
/// against n when at least four n are present, and t_theta quantiles.
inline nlohmann::json summarize_results(const std::vector<TrialResult>& results) {
  using nlohmann::json;
  std::map<std::pair<double, std::uint64_t>, std::vector<const TrialResult*>> groups;
  for (const auto& r : results) groups[{r.lambda, r.n}].push_back(&r);
  json out;
  out["schema"] = std::string(kResultsSchemaName) + "-summary/" + std::to_string(kResultsSchemaVersion);
  out["groups"] = json::array();
  std::map<double, std::map<std::string, std::vector<std::pair<double, double>>>> series;
  for (const auto& [key, rs] : groups) {
    auto mean_of = [&](auto get) {
      std::vector<double> xs;
      for (const auto* r : rs) xs.push_back(get(*r));
      return moments(xs);
    };
    const auto d2 = mean_of([](const TrialResult& r) { return static_cast<double>(r.core.count(2)); });
    const auto d3 = mean_of([](const TrialResult& r) { return static_cast<double>(r.core.count(3)); });
    const auto d4 = mean_of([](const TrialResult& r) { return static_cast<double>(r.core.count(4)); });
    const auto d5 = mean_of([](const TrialResult& r) { return static_cast<double>(r.core.count(5)); });
    const auto d6 = mean_of([](const TrialResult& r) { return static_cast<double>(r.core.count_at_least(6)); });
    const auto frac = mean_of([](const TrialResult& r) { return r.core_fraction(); });
    const auto theta = mean_of([](const TrialResult& r) { return static_cast<double>(r.extinction_step) / r.n; });
    const auto tt = mean_of([](const TrialResult& r) { return r.t_theta; });
    std::vector<double> tts;
    for (const auto* r : rs) tts.push_back(r->t_theta);
    std::sort(tts.begin(), tts.end());
    json g = {{"lambda", key.first},
              {"n", key.second},
              {"trials", rs.size()},
              {"mean_D2", d2.mean},
              {"mean_D3", d3.mean},
              {"mean_D4", d4.mean},
              {"mean_D5", d5.mean},
              {"mean_D6plus", d6.mean},
              {"mean_core_fraction", frac.mean},
              {"mean_theta_over_n", theta.mean},
              {"se_theta_over_n", theta.std_error},
              {"mean_t_theta", tt.mean},
              {"t_theta_quantiles",
               {{"0.05", quantile_or_nan(tts, 0.05)},
                {"0.5", quantile_or_nan(tts, 0.5)},
                {"0.95", quantile_or_nan(tts, 0.95)}}}};
    out["groups"].push_back(g);
    const double n = static_cast<double>(key.second);
    if (d2.mean > 0) series[key.first]["D2"].emplace_back(n, d2.mean);
    if (d3.mean > 0) series[key.first]["D3"].emplace_back(n, d3.mean);
    if (d4.mean > 0) series[key.first]["D4"].emplace_back(n, d4.mean);
  }
  out["slopes"] = json::array();
  for (const auto& [lambda, per] : series) {
    for (const auto& [name, pts] : per) {
      if (pts.size() < 4) continue;
      const auto fit = fit_loglog_slope(pts);
      out["slopes"].push_back({{"lambda", lambda}, {"statistic", "mean_" + name}, {"slope", fit.slope},
                               {"std_error", fit.std_error}});
    }
  }
  return out;
}

}  // namespace kslab
