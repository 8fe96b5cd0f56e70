#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "kslab/acceptance.hpp"
#include "kslab/fluid.hpp"
#include "kslab/lab.hpp"
#include "kslab/oracles.hpp"
#include "kslab/peeler.hpp"
#include "kslab/samplers.hpp"
#include "kslab/stats.hpp"

using namespace kslab;

namespace {

Multigraph from_edges(std::size_t n, std::initializer_list<std::pair<Vertex, Vertex>> edges) {
  Multigraph g(n);
  for (auto [u, v] : edges) g.add_edge(u, v);
  return g;
}

// (X, V, S, M) recomputed from scratch over alive vertices.
XvsState recount(const Multigraph& g) {
  const auto h = degree_histogram(g);
  const auto m = static_cast<std::int64_t>(g.n_alive_edges());
  return {static_cast<std::int64_t>(h.n_leaves()), static_cast<std::int64_t>(h.n_heavy()),
          static_cast<std::int64_t>(h.surplus()), m};
}

}  // namespace

TEST(KsStep, PathLeavesNothing) {
  auto g = from_edges(3, {{0, 1}, {1, 2}});
  Rng rng = make_rng(1);
  const auto d = ks_step(g, rng);
  EXPECT_EQ(d.state, (XvsState{0, 0, 0, 0}));
  EXPECT_EQ(d.edges_removed, 2u);
  EXPECT_EQ(g.n_alive_vertices(), 0u);
}

TEST(KsStep, TriangleWithPendant) {
  // triangle a=0, b=1, c=2 with leaf l=3 on a
  auto g = from_edges(4, {{0, 1}, {1, 2}, {2, 0}, {3, 0}});
  Rng rng = make_rng(2);
  const auto d = ks_step(g, rng);
  EXPECT_EQ(d.leaf, 3u);
  EXPECT_EQ(d.neighbour, 0u);
  EXPECT_EQ(d.edges_removed, 3u);
  EXPECT_EQ(d.state, (XvsState{2, 0, 0, 1}));
  EXPECT_TRUE(g.alive(1) && g.alive(2));
}

TEST(KsStep, StarLosesEverything) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto g = from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
    Rng rng = make_rng(seed);
    const auto d = ks_step(g, rng);
    EXPECT_EQ(d.neighbour, 0u);
    EXPECT_EQ(d.isolated_created, 2u);
    EXPECT_EQ(d.state, (XvsState{0, 0, 0, 0}));
  }
}

TEST(KsStep, NoLeafThrows) {
  auto g = from_edges(3, {{0, 1}, {1, 2}, {2, 0}});
  Rng rng = make_rng(3);
  EXPECT_THROW(ks_step(g, rng), Error);
  EXPECT_EQ(g.n_alive_edges(), 3u);
}

TEST(KsStep, LoopOnNeighbour) {
  // leaf 0 attached to 1, which carries a loop and an edge to 2
  auto g = from_edges(3, {{0, 1}, {1, 1}, {1, 2}});
  Rng rng = make_rng(4);
  const auto d = ks_step(g, rng);
  EXPECT_EQ(d.neighbour, 1u);
  EXPECT_EQ(d.edges_removed, 3u);
  EXPECT_EQ(d.state, (XvsState{0, 0, 0, 0}));
  EXPECT_FALSE(g.alive(2));
}

TEST(RunKarpSipser, TreeHasEmptyCore) {
  Rng rng = make_rng(5);
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + int(uniform_index(rng, 40));
    Multigraph g(n);
    for (int v = 1; v < n; ++v) g.add_edge(v, Vertex(uniform_index(rng, v)));
    const auto run = run_karp_sipser(g, rng, true);
    EXPECT_EQ(run.core.n_alive_vertices(), 0u);
    EXPECT_EQ(run.trace.steps.back().x, 0);
  }
}

TEST(RunKarpSipser, CycleIsItsOwnCore) {
  auto g = from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}});
  Rng rng = make_rng(6);
  const auto run = run_karp_sipser(g, rng, true);
  EXPECT_EQ(run.trace.extinction_step, 0);
  ASSERT_EQ(run.trace.steps.size(), 1u);
  const auto cs = core_summary(run.core);
  EXPECT_EQ(cs.count(2), 5u);
  EXPECT_EQ(cs.n_core_edges, 5u);
  EXPECT_TRUE(cs.is_simple_core);
}

TEST(CoreSummary, Examples) {
  EXPECT_EQ(core_summary(Multigraph(0)).n_core_vertices, 0u);
  const auto dbl = core_summary(from_edges(2, {{0, 1}, {0, 1}}));
  EXPECT_EQ(dbl.count(2), 2u);
  EXPECT_EQ(dbl.n_core_edges, 2u);
  EXPECT_FALSE(dbl.is_simple_core);
  EXPECT_THROW(core_summary(from_edges(2, {{0, 1}})), Error);
  EXPECT_THROW(core_summary(Multigraph(1)), Error);
}

TEST(RunKarpSipser, TraceMatchesRecount) {
  // Replay the same leaf choices step by step and compare with a full recount.
  Rng sampler = make_rng(7);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 300;
    const auto g = sample_uniform_multigraph(n, edges_for(kE, n), sampler);
    const std::uint64_t seed = sampler();
    Rng a = make_rng(seed), b = make_rng(seed);
    const auto run = run_karp_sipser(g, a, true);
    KarpSipser ks(g);
    ASSERT_EQ(ks.state(), run.trace.steps[0]);
    ASSERT_EQ(recount(ks.graph()), run.trace.steps[0]);
    for (std::size_t k = 1; k < run.trace.steps.size(); ++k) {
      EXPECT_GT(run.trace.steps[k - 1].x, 0);
      ks.step(b);
      const auto st = run.trace.steps[k];
      ASSERT_EQ(recount(ks.graph()), st) << "step " << k;
      EXPECT_EQ(st.s, 2 * st.m - st.x - 2 * st.v);
    }
    EXPECT_EQ(run.trace.steps.back().x, 0);
    EXPECT_EQ(std::int64_t(run.trace.steps.size()) - 1, run.trace.extinction_step);
  }
}

TEST(RunKarpSipser, CoreHasMinimumDegreeTwoAndIsStable) {
  Rng rng = make_rng(8);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 500;
    const auto run = run_karp_sipser(sample_uniform_multigraph(n, edges_for(3.5, n), rng), rng, false);
    const auto cs = core_summary(run.core);
    EXPECT_EQ(cs.count(1), 0u);
    std::uint64_t sum = 0, half = 0;
    for (auto [d, c] : cs.degree_counts) sum += c, half += d * c;
    EXPECT_EQ(sum, cs.n_core_vertices);
    EXPECT_EQ(half, 2 * cs.n_core_edges);
    EXPECT_EQ(run.isolated_at_start + run.vertices_peeled + cs.n_core_vertices, n);
    const auto again = run_karp_sipser(run.core, rng, false);
    EXPECT_EQ(again.trace.extinction_step, 0);
    EXPECT_EQ(core_summary(again.core), cs);
  }
}

TEST(RunKarpSipser, Deterministic) {
  Rng s1 = make_rng(9), s2 = make_rng(9);
  const auto a = run_karp_sipser(sample_uniform_multigraph(5000, 6796, s1), s1, true);
  const auto b = run_karp_sipser(sample_uniform_multigraph(5000, 6796, s2), s2, true);
  EXPECT_EQ(a.trace.steps, b.trace.steps);
  EXPECT_EQ(a.certificate.matching, b.certificate.matching);
}

TEST(RunKarpSipser, AbelianCore) {
  Rng rng = make_rng(10);
  for (int t = 0; t < 300; ++t) {
    const int n = 2 + int(uniform_index(rng, 29));
    const auto g = sample_uniform_multigraph(n, std::size_t(std::llround((1 + 3.5 * uniform01(rng)) * n / 2)), rng);
    Rng r1 = make_rng(rng()), r2 = make_rng(rng());
    const auto a = run_karp_sipser(g, r1, false);
    const auto b = run_karp_sipser(g, r2, false);
    EXPECT_TRUE(oracle::isomorphic(a.core.compacted(), b.core.compacted()));
  }
}

TEST(RunKarpSipser, OptimalOnAllSmallGraphs) {
  Rng rng = make_rng(11);
  for (int n = 1; n <= 6; ++n) {
    const int pairs = n * (n - 1) / 2;
    for (std::uint64_t mask = 0; mask < (1ULL << pairs); ++mask) {
      const auto msg = acceptance::detail::check_optimality(oracle::graph_from_mask(n, mask), rng);
      ASSERT_TRUE(msg.empty()) << "n " << n << " mask " << mask << ": " << msg;
    }
  }
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + int(uniform_index(rng, 12));
    const auto g = oracle::random_simple_graph(n, 0.05 + 0.7 * uniform01(rng), rng);
    const auto msg = acceptance::detail::check_optimality(g, rng);
    ASSERT_TRUE(msg.empty()) << msg;
  }
}

TEST(RunKarpSipser, MarkovPropertyMidProcess) {
  // Stop at k = n/5; G_k should look like G(X_k, V_k, S_k).
  Rng rng = make_rng(12);
  const std::size_t n = 10000;
  std::vector<double> peeled(12, 0), fresh(12, 0);
  for (int t = 0; t < 60; ++t) {
    KarpSipser ks(sample_uniform_multigraph(n, edges_for(kE, n), rng));
    for (std::size_t k = 0; k < n / 5 && ks.has_leaf(); ++k) ks.step(rng);
    const auto st = ks.state();
    for (auto [d, c] : degree_histogram(ks.graph()).counts)
      if (d >= 2) peeled[std::min<std::size_t>(d, 11)] += double(c);
    const auto g = sample_constrained_multigraph(st.x, st.v, st.s, rng);
    for (auto [d, c] : degree_histogram(g).counts)
      if (d >= 2) fresh[std::min<std::size_t>(d, 11)] += double(c);
  }
  EXPECT_GT(chi_square_two_sample(peeled, fresh).p_value, 1e-3);
}

TEST(RunKarpSipser, CriticalExtinctionTime) {
  Rng rng = make_rng(13);
  const std::size_t n = 1000000;
  const auto run = run_karp_sipser(sample_uniform_multigraph(n, edges_for(kE, n), rng), rng, false);
  EXPECT_NEAR(double(run.trace.extinction_step) / n, kTStar, 0.01);
}

TEST(TraceCsv, Format) {
  KsTrace trace;
  trace.steps = {{2, 1, 0, 2}, {0, 0, 0, 0}};
  std::ostringstream os;
  write_trace_csv(trace, os);
  EXPECT_EQ(os.str(), "k,X,V,S\n0,2,1,0\n1,0,0,0\n");
}
