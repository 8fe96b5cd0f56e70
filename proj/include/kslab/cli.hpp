#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kslab/acceptance.hpp"
#include "kslab/errors.hpp"
#include "kslab/fluid.hpp"
#include "kslab/graph.hpp"
#include "kslab/lab.hpp"
#include "kslab/limit_law.hpp"
#include "kslab/peeler.hpp"
#include "kslab/samplers.hpp"

namespace kslab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

// Writes to the named file, or to `fallback` when the path is empty or "-".
template <typename Fn>
void emit(const std::string& path, std::ostream& fallback, Fn&& write) {
  if (path.empty() || path == "-") {
    write(fallback);
    fallback.flush();
    return;
  }
  std::ostringstream buffer;
  write(buffer);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path + " for writing");
  out << buffer.str();
  if (!out) throw Error(ErrorCode::kIoFailure, "failed writing " + path);
}

inline unsigned resolve_threads(unsigned requested) { return requested == 0 ? default_threads() : requested; }

inline std::string format_double(double x) { return kslab::detail::format_double(x); }

}  // namespace detail

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string output;
  unsigned threads = 0;
};

/// Parses argv and runs one subcommand. Returns the process exit status.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Karp-Sipser random-graph laboratory", "kslab"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "kslab 1.0");

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Master random seed");
  app.add_option("-o,--output", global.output, "Output file ('-' or empty for stdout)");
  app.add_option("--threads", global.threads, "Worker threads (0: KSLAB_THREADS or hardware concurrency)");

  // gen
  auto* gen = app.add_subcommand("gen", "Sample a random multigraph and write it as an edge list");
  std::string gen_model = "multigraph";
  std::uint64_t gen_n = 1000, gen_m = 0, gen_x = 0, gen_v = 0, gen_s = 0;
  gen->add_option("--model", gen_model, "multigraph | simple | constrained")
      ->check(CLI::IsMember({"multigraph", "simple", "constrained"}));
  gen->add_option("--n", gen_n, "Vertex count (multigraph, simple)");
  gen->add_option("--m", gen_m, "Edge count (0: round(e n / 2))");
  gen->add_option("--x", gen_x, "Leaf count (constrained)");
  gen->add_option("--v", gen_v, "Count of vertices of degree >= 2 (constrained)");
  gen->add_option("--s", gen_s, "Surplus (constrained)");

  // run
  auto* run = app.add_subcommand("run", "Run leaf removal on a graph and summarize the core");
  std::string run_input, run_trace, run_core;
  std::uint64_t run_n = 1000, run_m = 0;
  run->add_option("--input", run_input, "Edge list to peel (default: sample G(n, m))");
  run->add_option("--n", run_n, "Vertex count when sampling");
  run->add_option("--m", run_m, "Edge count when sampling (0: round(e n / 2))");
  run->add_option("--trace", run_trace, "Write the (k, X, V, S) trace as CSV here");
  run->add_option("--core", run_core, "Write the core as an edge list here");

  // fluid
  auto* fluid = app.add_subcommand("fluid", "Tabulate the fluid limit and its drift on a time grid");
  std::uint64_t fluid_grid = 1000;
  double fluid_t_min = 0.0, fluid_t_max = kTStar;
  fluid->add_option("--grid", fluid_grid, "Number of grid intervals")->check(CLI::PositiveNumber);
  fluid->add_option("--t-min", fluid_t_min, "First grid time");
  fluid->add_option("--t-max", fluid_t_max, "Last grid time (at most t*)");

  // theta
  auto* theta = app.add_subcommand("theta", "Sample the Brownian first-passage time and the limit vector");
  std::uint64_t theta_samples = 10000;
  double theta_dt = 1e-4, theta_barrier = 1.0;
  bool theta_quantiles = false, theta_reflected = false;
  std::string theta_bridge = "auto";
  theta->add_option("--samples", theta_samples, "Number of samples")->check(CLI::PositiveNumber);
  theta->add_option("--dt", theta_dt, "Base time step, in (0, 1e-3]");
  theta->add_option("--bridge", theta_bridge, "Brownian-bridge crossing test: auto | on | off")
      ->check(CLI::IsMember({"auto", "on", "off"}));
  theta->add_option("--barrier-scale", theta_barrier, "Barrier c t^-2 scale c");
  theta->add_flag("--reflected", theta_reflected, "Hit -c t^-2 with negated noise");
  theta->add_flag("--quantiles", theta_quantiles, "Emit the quantile table instead of samples");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run a Monte Carlo experiment and write per-trial results");
  std::string exp_config, exp_mode = "critical-fixed-m", exp_n_values = "1000", exp_lambda_values, exp_summary,
                          exp_trace_dir;
  double exp_lambda = kE, exp_dt = 1e-4;
  std::uint64_t exp_trials = 10;
  bool exp_simple = false, exp_fluct = false;
  exp->add_option("--config", exp_config, "Key = value config file; explicit flags override it");
  exp->add_option("--mode", exp_mode, "critical-fixed-m | binomial-p | lambda-sweep")
      ->check(CLI::IsMember({"critical-fixed-m", "binomial-p", "lambda-sweep"}));
  exp->add_option("--n-values", exp_n_values, "Comma-separated increasing vertex counts (2^k allowed)");
  exp->add_option("--lambda", exp_lambda, "Edge density: m = round(lambda n / 2) or p = lambda / n");
  exp->add_option("--lambda-values", exp_lambda_values, "Comma-separated densities for lambda-sweep");
  exp->add_option("--trials", exp_trials, "Trials per (lambda, n)")->check(CLI::PositiveNumber);
  exp->add_option("--dt-theta", exp_dt, "Time step recorded for limit-law comparisons");
  exp->add_flag("--simple", exp_simple, "Condition on simple graphs");
  exp->add_flag("--record-fluctuations", exp_fluct, "Record rescaled fluctuation summaries");
  exp->add_option("--trace-dir", exp_trace_dir, "Write every trial trace as CSV into this directory");
  exp->add_option("--summary", exp_summary, "Write a JSON summary here");

  // verify
  auto* verify = app.add_subcommand("verify", "Run the acceptance checks and report pass/fail");
  bool verify_quick = false, verify_full = false;
  std::string verify_suite = "all";
  auto* q = verify->add_flag("--quick", verify_quick, "Small sizes, minutes");
  auto* f = verify->add_flag("--full", verify_full, "Acceptance sizes, up to an hour or more");
  q->excludes(f);
  verify->add_option("--suite", verify_suite, "'all' or comma-separated criterion numbers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    // Help and version requests; exit() formats the help of the subcommand asked.
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "kslab: usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  const unsigned threads = detail::resolve_threads(global.threads);
  try {
    if (gen->parsed()) {
      Rng rng = make_rng(global.seed);
      Multigraph g;
      if (gen_model == "constrained") {
        g = sample_constrained_multigraph(gen_x, gen_v, gen_s, rng);
      } else {
        const std::uint64_t m = gen_m ? gen_m : edges_for(kE, gen_n);
        g = gen_model == "simple" ? sample_simple_gnm(gen_n, m, rng) : sample_uniform_multigraph(gen_n, m, rng);
      }
      detail::emit(global.output, out, [&](std::ostream& os) { write_edge_list(g, os); });
    } else if (run->parsed()) {
      Rng rng = make_rng(global.seed);
      Multigraph g;
      if (!run_input.empty()) {
        std::ifstream in(run_input);
        if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + run_input);
        g = read_edge_list(in);
      } else {
        g = sample_uniform_multigraph(run_n, run_m ? run_m : edges_for(kE, run_n), rng);
      }
      const std::uint64_t n = g.n_vertices(), m = g.n_alive_edges();
      auto result = run_karp_sipser(std::move(g), rng, !run_trace.empty());
      const auto cs = core_summary(result.core);
      nlohmann::json j = {{"n", n},
                          {"m", m},
                          {"seed", global.seed},
                          {"extinction_step", result.trace.extinction_step},
                          {"theta_over_n", n ? static_cast<double>(result.trace.extinction_step) / n : 0.0},
                          {"t_theta", n ? empirical_t_theta(result.trace.extinction_step, n) : 0.0},
                          {"isolated_start", result.isolated_at_start},
                          {"peeled", result.vertices_peeled},
                          {"independent_set_size", result.certificate.independent_set.size()},
                          {"matching_size", result.certificate.matching.size()},
                          {"core_vertices", cs.n_core_vertices},
                          {"core_edges", cs.n_core_edges},
                          {"core_simple", cs.is_simple_core}};
      nlohmann::json counts = nlohmann::json::object();
      for (auto [d, c] : cs.degree_counts) counts[std::to_string(d)] = c;
      j["core_degree_counts"] = counts;
      if (!run_trace.empty()) {
        detail::emit(run_trace, out, [&](std::ostream& os) { write_trace_csv(result.trace, os); });
      }
      if (!run_core.empty()) {
        detail::emit(run_core, out, [&](std::ostream& os) { write_edge_list(result.core.compacted(), os); });
      }
      detail::emit(global.output, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    } else if (fluid->parsed()) {
      require(fluid_t_min >= 0 && fluid_t_max <= kTStar && fluid_t_min <= fluid_t_max, ErrorCode::kUsage,
              "need 0 <= t-min <= t-max <= t*");
      detail::emit(global.output, out, [&](std::ostream& os) {
        os << "t,x,v,s,z,beta,phi_a,phi_b,phi_c\n";
        for (std::uint64_t i = 0; i <= fluid_grid; ++i) {
          const double t = i == fluid_grid ? fluid_t_max
                                           : fluid_t_min + (fluid_t_max - fluid_t_min) * static_cast<double>(i) /
                                                               static_cast<double>(fluid_grid);
          const auto st = fluid_at_time(t);
          double pa = NAN, pb = NAN, pc = NAN;
          if (st.x > 0 && st.v > 0) {
            const auto d = drift_phi(st.x, st.v, st.s);
            pa = d.phi_a, pb = d.phi_b, pc = d.phi_c;
          }
          using detail::format_double;
          os << format_double(st.t) << ',' << format_double(st.x) << ',' << format_double(st.v) << ','
             << format_double(st.s) << ',' << format_double(st.z) << ',' << format_double(st.beta) << ','
             << format_double(pa) << ',' << format_double(pb) << ',' << format_double(pc) << '\n';
        }
      });
    } else if (theta->parsed()) {
      ThetaOptions o;
      o.dt = theta_dt;
      o.reflected = theta_reflected;
      o.barrier_scale = theta_barrier;
      o.bridge = theta_bridge == "on" ? BridgeMode::kOn : theta_bridge == "off" ? BridgeMode::kOff : BridgeMode::kAuto;
      require(theta_dt > 0 && theta_dt <= 1e-3, ErrorCode::kUsage, "--dt must lie in (0, 1e-3]");
      const auto samples = sample_theta_batch(theta_samples, global.seed, o, threads);
      if (theta_quantiles) {
        require(theta_samples >= 1000, ErrorCode::kUsage, "--quantiles needs at least 1000 samples");
        Rng rng = make_rng(derive_seed(global.seed, {0x626f6f74ULL}));
        const auto table = quantile_table(samples, rng);
        detail::emit(global.output, out, [&](std::ostream& os) {
          os << "# samples " << table.n_samples << ", censored " << table.n_censored << ", dt "
             << detail::format_double(theta_dt) << '\n';
          os << "level,theta,bootstrap_se\n";
          for (std::size_t i = 0; i < table.levels.size(); ++i) {
            os << table.levels[i] << ',' << detail::format_double(table.values[i]) << ','
               << detail::format_double(table.std_errors[i]) << '\n';
          }
        });
      } else {
        Rng rng = make_rng(derive_seed(global.seed, {0x6435ULL}));
        detail::emit(global.output, out, [&](std::ostream& os) {
          os << "theta,d2,d3,d4,d5,t_theta\n";
          for (double th : samples) {
            if (std::isinf(th)) {
              os << "inf,0,0,0,0,0\n";
              continue;
            }
            const auto lv = limit_vector_from_theta(th, rng);
            using detail::format_double;
            os << format_double(lv.theta) << ',' << format_double(lv.d2) << ',' << format_double(lv.d3) << ','
               << format_double(lv.d4) << ',' << lv.d5 << ',' << format_double(lv.t_theta) << '\n';
          }
        });
      }
    } else if (exp->parsed()) {
      ExperimentConfig c;
      if (!exp_config.empty()) c = load_config_file(exp_config);
      auto given = [&](const std::string& name) { return exp->count(name) > 0; };
      if (exp_config.empty() || given("--mode")) set_config_value(c, "mode", exp_mode);
      if (exp_config.empty() || given("--n-values")) set_config_value(c, "n_values", exp_n_values);
      if (exp_config.empty() || given("--lambda")) c.lambda = exp_lambda;
      if (given("--lambda-values")) set_config_value(c, "lambda_values", exp_lambda_values);
      if (exp_config.empty() || given("--trials")) c.n_trials = exp_trials;
      if (exp_config.empty() || given("--dt-theta")) c.dt_theta = exp_dt;
      if (given("--simple")) c.simple = exp_simple;
      if (given("--record-fluctuations")) c.record_fluctuations = exp_fluct;
      if (given("--trace-dir")) c.trace_dir = exp_trace_dir;
      if (exp_config.empty() || app.count("--seed")) c.master_seed = global.seed;
      if (exp_config.empty() || app.count("--threads")) c.threads = threads;
      if (exp_config.empty() || app.count("--output")) c.output_path = global.output;
      if (c.output_path.empty()) c.output_path = "results.csv";
      if (c.threads == 0) c.threads = default_threads();
      validate(c);
      for (const auto& line : config_lines(c)) err << "# " << line << '\n';
      const auto results = run_critical_experiment(c);
      if (!exp_summary.empty()) {
        detail::emit(exp_summary, out, [&](std::ostream& os) { os << summarize_results(results).dump(2) << '\n'; });
      }
    } else if (verify->parsed()) {
      const auto tier = acceptance::tier_by_name(verify_full ? "full" : "quick");
      std::vector<int> selection;
      if (verify_suite != "all") {
        for (const auto& item : kslab::detail::split(verify_suite, ',')) {
          selection.push_back(static_cast<int>(kslab::detail::parse_u64(item)));
          require(selection.back() >= 1 && selection.back() <= acceptance::kCriterionCount, ErrorCode::kUsage,
                  "criterion numbers run from 1 to 15");
        }
      }
      out << "# kslab verify, tier " << tier.name << ", table version " << acceptance::kTierTableVersion << '\n';
      const auto report = acceptance::run_acceptance(tier, selection, threads, &out);
      if (!global.output.empty()) {
        detail::emit(global.output, out, [&](std::ostream& os) { os << acceptance::to_json(report).dump(2) << '\n'; });
      }
      std::size_t failed = 0;
      for (const auto& r : report.criteria) failed += r.pass ? 0 : 1;
      if (failed) {
        err << "kslab: verify: " << failed << " of " << report.criteria.size() << " criteria failed\n";
        return kExitRuntime;
      }
    }
  } catch (const Error& e) {
    err << "kslab: " << e.what() << '\n';
    return e.code() == ErrorCode::kUsage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "kslab: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace kslab::cli
