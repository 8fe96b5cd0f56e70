#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "kslab/cli.hpp"
#include "kslab/fluid.hpp"
#include "kslab/lab.hpp"

using namespace kslab;

namespace {

struct Outcome {
  int rc;
  std::string out, err;
};

Outcome call(std::vector<std::string> args) {
  args.insert(args.begin(), "kslab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = cli::dispatch(int(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

// Runs the installed binary; stdout only.
Outcome shell(const std::string& args) {
  const std::string cmd = std::string(KSLAB_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf{};
  for (std::size_t k; (k = fread(buf.data(), 1, buf.size(), p)) > 0;) out.append(buf.data(), k);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, {}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("kslab_test_cli_" + name);
}

}  // namespace

TEST(Gen, Deterministic) {
  const auto a = call({"gen", "--n", "100", "--m", "135", "--seed", "7"});
  const auto b = call({"gen", "--n", "100", "--m", "135", "--seed", "7"});
  ASSERT_EQ(a.rc, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.substr(0, a.out.find('\n')), "100 135");
  EXPECT_NE(a.out, call({"gen", "--n", "100", "--m", "135", "--seed", "8"}).out);
  std::istringstream in(a.out);
  EXPECT_EQ(read_edge_list(in).n_alive_edges(), 135u);
}

TEST(Gen, ConstrainedHonoursTriple) {
  const auto r = call({"gen", "--model", "constrained", "--x", "10", "--v", "20", "--s", "6", "--seed", "3"});
  ASSERT_EQ(r.rc, 0) << r.err;
  std::istringstream in(r.out);
  const auto h = degree_histogram(read_edge_list(in));
  EXPECT_EQ(h.n_leaves(), 10u);
  EXPECT_EQ(h.n_heavy(), 20u);
  EXPECT_EQ(h.surplus(), 6u);
}

TEST(Gen, SimpleModelIsSimple) {
  const auto r = call({"gen", "--model", "simple", "--n", "50", "--seed", "2"});
  ASSERT_EQ(r.rc, 0) << r.err;
  std::istringstream in(r.out);
  EXPECT_TRUE(is_simple(read_edge_list(in)));
}

TEST(Fluid, FirstRowIsInitialCondition) {
  const auto r = call({"fluid", "--grid", "10"});
  ASSERT_EQ(r.rc, 0);
  std::istringstream in(r.out);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "t,x,v,s,z,beta,phi_a,phi_b,phi_c");
  std::vector<double> vals;
  std::stringstream rs(row);
  for (std::string cell; std::getline(rs, cell, ',');) vals.push_back(std::stod(cell));
  ASSERT_EQ(vals.size(), 9u);
  const auto p = fluid_at_time(0.0);
  EXPECT_EQ(vals[0], 0.0);
  EXPECT_NEAR(vals[1], p.x, 1e-10);
  EXPECT_NEAR(vals[2], p.v, 1e-10);
  EXPECT_NEAR(vals[3], p.s, 1e-10);
  EXPECT_NEAR(vals[4], kE, 1e-10);
  std::size_t lines = 2;
  while (std::getline(in, row)) ++lines;
  EXPECT_EQ(lines, 12u);
}

TEST(Theta, SamplesAndQuantiles) {
  const auto r = call({"theta", "--samples", "20", "--seed", "4"});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 21);
  EXPECT_EQ(r.out, call({"theta", "--samples", "20", "--seed", "4", "--threads", "3"}).out);
  EXPECT_EQ(call({"theta", "--samples", "10", "--quantiles"}).rc, cli::kExitUsage);
  EXPECT_EQ(call({"theta", "--dt", "0.01"}).rc, cli::kExitUsage);
}

TEST(Run, JsonSummary) {
  const auto r = call({"run", "--n", "500", "--seed", "3"});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["n"], 500);
  EXPECT_EQ(j["m"], edges_for(kE, 500));
  EXPECT_EQ(j["peeled"].get<std::uint64_t>() + j["core_vertices"].get<std::uint64_t>() +
                j["isolated_start"].get<std::uint64_t>(),
            500u);
  EXPECT_TRUE(j.contains("core_degree_counts"));
}

TEST(Run, FromEdgeListWithTraceAndCore) {
  const auto graph = temp_path("g.txt"), trace = temp_path("t.csv"), core = temp_path("c.txt");
  {
    std::ofstream g(graph);
    g << "4 4\n1 2\n2 3\n3 1\n4 1\n";
  }
  const auto r = call({"run", "--input", graph.string(), "--trace", trace.string(), "--core", core.string()});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["core_vertices"], 0);
  EXPECT_EQ(j["matching_size"], 2);
  EXPECT_EQ(slurp(trace).substr(0, 8), "k,X,V,S\n");
  EXPECT_EQ(slurp(core).substr(0, 4), "0 0\n");
  for (const auto& p : {graph, trace, core}) std::filesystem::remove(p);
}

TEST(ExitCodes, UsageAndRuntime) {
  EXPECT_EQ(call({}).rc, cli::kExitUsage);
  EXPECT_EQ(call({"gen", "--bogus"}).rc, cli::kExitUsage);
  EXPECT_EQ(call({"gen", "--model", "tree"}).rc, cli::kExitUsage);
  EXPECT_EQ(call({"verify", "--quick", "--full"}).rc, cli::kExitUsage);
  EXPECT_EQ(call({"run", "--input", "/nonexistent/graph.txt"}).rc, cli::kExitRuntime);
  EXPECT_EQ(call({"experiment", "--config", "/nonexistent/kslab.cfg"}).rc, cli::kExitRuntime);
  EXPECT_EQ(call({"--help"}).rc, cli::kExitOk);
  EXPECT_EQ(shell("gen --n 3").rc, 0);
  EXPECT_EQ(shell("gen --frobnicate").rc, 2);
  EXPECT_EQ(shell("run --input /nonexistent/graph.txt").rc, 1);
}

TEST(Experiment, HeaderEchoesResolvedConfig) {
  const auto cfg = temp_path("exp.cfg"), out = temp_path("exp.csv");
  {
    std::ofstream c(cfg);
    c << "n_values = 200, 400\nn_trials = 3\nseed = 11\n";
  }
  const auto r = call({"experiment", "--config", cfg.string(), "--trials", "2", "-o", out.string()});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto text = slurp(out);
  EXPECT_NE(text.find("# n_trials = 2"), std::string::npos);
  EXPECT_NE(text.find("# master_seed = 11"), std::string::npos);
  EXPECT_NE(r.err.find("# n_trials = 2"), std::string::npos);
  std::ifstream in(out);
  const auto rows = read_results(in);
  EXPECT_EQ(rows.size(), 4u);
  for (const auto& row : rows) EXPECT_EQ(row.trial < 2, true);
  for (const auto& p : {cfg, out}) std::filesystem::remove(p);
}

TEST(Verify, SuiteSubsetAndJson) {
  const auto json = temp_path("verify.json");
  const auto r = call({"verify", "--quick", "--suite", "13", "-o", json.string()});
  EXPECT_EQ(r.rc, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(json));
  EXPECT_FALSE(j.empty());
  std::filesystem::remove(json);
  EXPECT_EQ(call({"verify", "--suite", "99"}).rc, cli::kExitUsage);
}

TEST(Help, MatchesSnapshots) {
  const std::filesystem::path dir = std::filesystem::path(KSLAB_TEST_DATA_DIR) / "help";
  EXPECT_EQ(call({"--help"}).out, slurp(dir / "kslab.txt"));
  for (const char* sub : {"gen", "run", "fluid", "theta", "experiment", "verify"}) {
    const auto r = call({sub, "--help"});
    EXPECT_EQ(r.rc, 0);
    EXPECT_EQ(r.out, slurp(dir / (std::string(sub) + ".txt"))) << sub;
  }
}
