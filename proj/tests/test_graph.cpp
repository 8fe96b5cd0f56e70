#include <cmath>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "kslab/fluid.hpp"
#include "kslab/graph.hpp"
#include "kslab/lab.hpp"
#include "kslab/samplers.hpp"
#include "kslab/stats.hpp"

using namespace kslab;

namespace {

Multigraph from_edges(std::size_t n, std::initializer_list<std::pair<Vertex, Vertex>> edges) {
  Multigraph g(n);
  for (auto [u, v] : edges) g.add_edge(u, v);
  return g;
}

void expect_histogram_invariants(const Multigraph& g) {
  const auto h = degree_histogram(g);
  std::uint64_t half = 0;
  g.for_each_alive_edge([&](EdgeId, const Edge&) { half += 2; });
  EXPECT_EQ(h.half_edges(), half);
  EXPECT_EQ(h.half_edges() % 2, 0u);
  EXPECT_EQ(static_cast<std::int64_t>(h.surplus()),
            static_cast<std::int64_t>(h.half_edges()) - static_cast<std::int64_t>(h.n_leaves()) -
                2 * static_cast<std::int64_t>(h.n_heavy()));
}

}  // namespace

TEST(Multigraph, LoopsCountTwice) {
  auto g = from_edges(2, {{0, 0}, {0, 1}});
  EXPECT_EQ(g.degree(0), 3u);
  EXPECT_EQ(g.degree(1), 1u);
  g.remove_edge(0);
  EXPECT_EQ(g.degree(0), 1u);
  EXPECT_EQ(g.n_alive_edges(), 1u);
}

TEST(Multigraph, RemoveVertexRequiresIsolation) {
  auto g = from_edges(2, {{0, 1}});
  EXPECT_THROW(g.remove_vertex(0), Error);
  g.remove_edge(0);
  g.remove_vertex(0);
  EXPECT_FALSE(g.alive(0));
  EXPECT_EQ(g.n_alive_vertices(), 1u);
  EXPECT_THROW(g.add_edge(0, 1), Error);
  EXPECT_THROW(g.add_edge(1, 2), Error);
}

TEST(DegreeHistogram, Triangle) {
  const auto h = degree_histogram(from_edges(3, {{0, 1}, {1, 2}, {2, 0}}));
  EXPECT_EQ(h.count(2), 3u);
  EXPECT_EQ(h.n_leaves(), 0u);
  EXPECT_EQ(h.n_heavy(), 3u);
  EXPECT_EQ(h.surplus(), 0);
}

TEST(DegreeHistogram, Path) {
  const auto h = degree_histogram(from_edges(3, {{0, 1}, {1, 2}}));
  EXPECT_EQ(h.count(1), 2u);
  EXPECT_EQ(h.count(2), 1u);
  EXPECT_EQ(h.n_leaves(), 2u);
  EXPECT_EQ(h.n_heavy(), 1u);
  EXPECT_EQ(h.surplus(), 0);
}

TEST(DegreeHistogram, Star) {
  const auto h = degree_histogram(from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}));
  EXPECT_EQ(h.count(1), 4u);
  EXPECT_EQ(h.count(4), 1u);
  EXPECT_EQ(h.half_edges(), 8u);
  EXPECT_EQ(h.surplus(), 2);
}

TEST(IsSimple, Examples) {
  EXPECT_TRUE(is_simple(from_edges(3, {{0, 1}, {1, 2}, {2, 0}})));
  EXPECT_FALSE(is_simple(from_edges(1, {{0, 0}})));
  EXPECT_FALSE(is_simple(from_edges(2, {{0, 1}, {1, 0}})));
  auto g = from_edges(2, {{0, 1}, {1, 0}});
  g.remove_edge(1);
  EXPECT_TRUE(is_simple(g));
}

TEST(SimpleProbability, Examples) {
  DegreeSequence two, three, one;
  two.counts[2] = 100;
  three.counts[3] = 100;
  one.counts[1] = 100;
  EXPECT_NEAR(simple_probability(two), std::exp(-0.75), 1e-12);
  EXPECT_NEAR(simple_probability(three), std::exp(-2.0), 1e-12);
  EXPECT_NEAR(simple_probability(one), 1.0, 1e-12);
  EXPECT_THROW(simple_probability(DegreeSequence{}), Error);
}

TEST(SimpleProbability, MonotoneInMu) {
  double last = 1.0 + 1e-12;
  for (int d = 1; d <= 8; ++d) {
    DegreeSequence seq;
    seq.counts[d] = 10;
    seq.counts[d + 1] = 7;
    const double p = simple_probability(seq);
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(EdgeList, RoundTrip) {
  Rng rng = make_rng(4);
  const auto g = sample_uniform_multigraph(50, 80, rng);
  std::stringstream ss;
  write_edge_list(g, ss);
  const auto h = read_edge_list(ss);
  ASSERT_EQ(h.n_vertices(), g.n_vertices());
  ASSERT_EQ(h.n_edges(), g.n_edges());
  for (EdgeId e = 0; e < g.n_edges(); ++e) {
    EXPECT_EQ(h.edge(e).u, g.edge(e).u);
    EXPECT_EQ(h.edge(e).v, g.edge(e).v);
  }
}

TEST(EdgeList, FormatAndErrors) {
  std::stringstream ss;
  write_edge_list(from_edges(2, {{0, 0}, {0, 1}}), ss);
  EXPECT_EQ(ss.str(), "2 2\n1 1\n1 2\n");
  std::stringstream bad("2 1\n1 3\n");
  EXPECT_THROW(read_edge_list(bad), Error);
  std::stringstream short_file("3 2\n1 2\n");
  EXPECT_THROW(read_edge_list(short_file), Error);
  std::stringstream comments("# hello\n\n3 1\n# edge\n2 3\n");
  EXPECT_EQ(read_edge_list(comments).n_edges(), 1u);
}

TEST(UniformMultigraph, SingleVertexIsAllLoops) {
  Rng rng = make_rng(1);
  const auto g = sample_uniform_multigraph(1, 3, rng);
  EXPECT_EQ(g.n_edges(), 3u);
  EXPECT_EQ(g.degree(0), 6u);
}

TEST(UniformMultigraph, LoopProbabilityHalf) {
  Rng rng = make_rng(2);
  const int trials = 100000;
  int loops = 0;
  for (int i = 0; i < trials; ++i) loops += sample_uniform_multigraph(2, 1, rng).edge(0).is_loop();
  EXPECT_NEAR(loops / double(trials), 0.5, 3 * std::sqrt(0.25 / trials));
}

TEST(UniformMultigraph, LeafFraction) {
  Rng rng = make_rng(3);
  const std::size_t n = 100000;
  const auto g = sample_uniform_multigraph(n, edges_for(kE, n), rng);
  expect_histogram_invariants(g);
  EXPECT_NEAR(degree_histogram(g).n_leaves() / double(n), std::exp(1 - kE), 0.005);
}

TEST(UniformMultigraph, DegreeLawIsPoisson) {
  Rng rng = make_rng(5);
  const std::size_t n = 20000;
  const auto h = degree_histogram(sample_uniform_multigraph(n, edges_for(kE, n), rng));
  std::vector<double> observed(20, 0), probs(20, 0);
  for (auto [d, c] : h.counts) observed[std::min<std::size_t>(d, 19)] += static_cast<double>(c);
  double p = std::exp(-kE), tail = 1.0;
  for (int d = 0; d < 19; ++d) {
    probs[d] = p;
    tail -= p;
    p *= kE / (d + 1);
  }
  probs[19] = tail;
  EXPECT_GT(chi_square_goodness_of_fit(observed, probs).p_value, 1e-3);
}

TEST(SimpleGnm, SmallCases) {
  Rng rng = make_rng(6);
  const auto tri = sample_simple_gnm(3, 3, rng);
  EXPECT_TRUE(is_simple(tri));
  for (Vertex v = 0; v < 3; ++v) EXPECT_EQ(tri.degree(v), 2u);
  const auto edge = sample_simple_gnm(2, 1, rng);
  EXPECT_FALSE(edge.edge(0).is_loop());
  EXPECT_THROW(sample_simple_gnm(3, 4, rng), Error);
}

TEST(SimpleGnm, AcceptanceRate) {
  Rng rng = make_rng(7);
  const std::size_t n = 10000;
  std::uint64_t attempts = 0;
  const int samples = 60;
  for (int i = 0; i < samples; ++i) {
    const auto s = sample_simple_gnm_counted(n, edges_for(kE, n), rng);
    EXPECT_TRUE(is_simple(s.graph));
    attempts += s.attempts;
  }
  EXPECT_NEAR(samples / double(attempts), std::exp(-kE / 2 - kE * kE / 4), 0.01);
}

TEST(ConfigurationModel, TrivialPairings) {
  Rng rng = make_rng(8);
  const auto loop = sample_configuration_model({2}, rng);
  ASSERT_EQ(loop.n_edges(), 1u);
  EXPECT_TRUE(loop.edge(0).is_loop());
  const auto edge = sample_configuration_model({1, 1}, rng);
  ASSERT_EQ(edge.n_edges(), 1u);
  EXPECT_FALSE(edge.edge(0).is_loop());
  EXPECT_THROW(sample_configuration_model({1, 2}, rng), Error);
}

TEST(ConfigurationModel, DegreesPreserved) {
  Rng rng = make_rng(9);
  std::vector<std::uint32_t> deg{1, 2, 3, 4, 5, 1, 2};
  const auto g = sample_configuration_model(deg, rng);
  for (Vertex v = 0; v < deg.size(); ++v) EXPECT_EQ(g.degree(v), deg[v]);
}

TEST(ConfigurationModel, FourVertexCubicSimplicity) {
  // Of the 11!! = 10395 pairings of 12 half-edges, 3!^4 = 1296 give K4.
  Rng rng = make_rng(10);
  const int trials = 100000;
  int simple = 0;
  for (int i = 0; i < trials; ++i) simple += configuration_model_is_simple({3, 3, 3, 3}, rng);
  const double p = 1296.0 / 10395.0;
  EXPECT_NEAR(simple / double(trials), p, 4 * std::sqrt(p * (1 - p) / trials));
}

TEST(ConfigurationModel, LargeCubicSimplicity) {
  Rng rng = make_rng(11);
  std::vector<std::uint32_t> deg(10000, 3);
  ConfigurationSimplicityTester tester(deg);
  const int trials = 5000;
  int simple = 0;
  for (int i = 0; i < trials; ++i) simple += tester.trial(rng);
  EXPECT_NEAR(simple / double(trials), std::exp(-2.0), 0.015);
}

TEST(TruncatedPoisson, LawMatches) {
  for (double z : {1e-4, 0.5, 1.5, 3.0, 7.0}) {
    Rng rng = make_rng(12);
    std::vector<double> observed(30, 0), probs(30, 0);
    const int draws = 50000;
    for (int i = 0; i < draws; ++i) {
      const auto d = sample_truncated_poisson(z, rng);
      ASSERT_GE(d, 2u);
      observed[std::min<std::uint32_t>(d, 29)] += 1;
    }
    const double norm = std::expm1(z) - z;
    double p = 1.0;
    for (int d = 1; d < 30; ++d) {
      p *= z / d;
      if (d >= 2) probs[d] = p / norm;
    }
    double tail = 1.0;
    for (int d = 2; d < 29; ++d) tail -= probs[d];
    probs[29] = std::max(tail, 0.0);
    EXPECT_GT(chi_square_goodness_of_fit(observed, probs).p_value, 1e-3) << "z = " << z;
  }
}

TEST(ConstrainedMultigraph, TrivialCases) {
  Rng rng = make_rng(13);
  const auto cycle = sample_constrained_multigraph(0, 3, 0, rng);
  for (Vertex v = 0; v < 3; ++v) EXPECT_EQ(cycle.degree(v), 2u);
  const auto edge = sample_constrained_multigraph(2, 0, 0, rng);
  ASSERT_EQ(edge.n_edges(), 1u);
  EXPECT_EQ(edge.degree(0), 1u);
  EXPECT_EQ(edge.degree(1), 1u);
  EXPECT_THROW(sample_constrained_multigraph(1, 2, 0, rng), Error);
  EXPECT_THROW(sample_constrained_multigraph(0, 0, 2, rng), Error);
}

TEST(ConstrainedMultigraph, HistogramMatchesTriple) {
  Rng rng = make_rng(14);
  for (auto [x, v, s] : {std::tuple{10, 20, 6}, {0, 7, 2}, {6, 100, 0}, {3, 3, 41}}) {
    const auto g = sample_constrained_multigraph(x, v, s, rng);
    expect_histogram_invariants(g);
    const auto h = degree_histogram(g);
    EXPECT_EQ(h.n_leaves(), std::uint64_t(x));
    EXPECT_EQ(h.n_heavy(), std::uint64_t(v));
    EXPECT_EQ(h.surplus(), s);
    EXPECT_EQ(h.count(0), 0u);
  }
}

TEST(ConstrainedMultigraph, DegreeThreeCount) {
  Rng rng = make_rng(15);
  double total = 0;
  const int trials = 10;
  for (int i = 0; i < trials; ++i) total += sample_heavy_degree_counts(1000000, 10000, rng)[3];
  EXPECT_NEAR(total / trials, 10000.0, 300.0);
}

TEST(ConstrainedMultigraph, HeavyLawIsConditionedPoisson) {
  Rng rng = make_rng(16);
  const std::uint64_t v = 20000, s = 15000;
  const double z = solve_z(double(v), double(s));
  std::vector<double> observed(25, 0), probs(25, 0);
  for (int t = 0; t < 5; ++t) {
    const auto counts = sample_heavy_degree_counts(v, s, rng);
    std::uint64_t total = 0, half = 0;
    for (std::size_t d = 0; d < counts.size(); ++d) {
      observed[std::min<std::size_t>(d, 24)] += double(counts[d]);
      total += counts[d];
      half += d * counts[d];
    }
    EXPECT_EQ(total, v);
    EXPECT_EQ(half, 2 * v + s);
  }
  const double norm = std::expm1(z) - z;
  double p = 1.0, tail = 1.0;
  for (int d = 1; d < 24; ++d) {
    p *= z / d;
    if (d >= 2) {
      probs[d] = p / norm;
      tail -= probs[d];
    }
  }
  probs[24] = std::max(0.0, tail);
  EXPECT_GT(chi_square_goodness_of_fit(observed, probs).p_value, 1e-3);
}

TEST(ConstrainedMultigraph, DynamicProgrammingPathIsExact) {
  // v = 3, s = 2: heavy degree vectors with sum 8 and entries >= 2, weighted
  // by prod 1/d!. Compositions: (4,2,2)x3 weight 1/96 each, (3,3,2)x3 weight 1/72 each.
  Rng rng = make_rng(17);
  std::map<std::vector<std::uint64_t>, int> seen;
  const int trials = 40000;
  for (int i = 0; i < trials; ++i) ++seen[sample_heavy_degree_counts(3, 2, rng)];
  ASSERT_EQ(seen.size(), 2u);
  const double w422 = 3.0 / 96, w332 = 3.0 / 72;
  const double p422 = w422 / (w422 + w332);
  int c422 = 0;
  for (const auto& [counts, c] : seen)
    if (counts.size() > 4 && counts[4] == 1) c422 = c;
  EXPECT_NEAR(c422 / double(trials), p422, 4 * std::sqrt(p422 * (1 - p422) / trials));
}

TEST(ConstrainedMultigraph, SameHistogramLawAsUniform) {
  // Resampling G(n, m) given its own (X, V, S) must leave the degree law unchanged.
  Rng rng = make_rng(18);
  const std::size_t n = 1000;
  std::vector<double> a(12, 0), b(12, 0);
  for (int t = 0; t < 10000; ++t) {
    const auto h = degree_histogram(sample_uniform_multigraph(n, edges_for(kE, n), rng));
    for (auto [d, c] : h.counts)
      if (d >= 2) a[std::min<std::size_t>(d, 11)] += double(c);
    const auto g = degree_histogram(sample_constrained_multigraph(h.n_leaves(), h.n_heavy(), h.surplus(), rng));
    EXPECT_EQ(g.n_leaves(), h.n_leaves());
    for (auto [d, c] : g.counts)
      if (d >= 2) b[std::min<std::size_t>(d, 11)] += double(c);
  }
  EXPECT_GT(chi_square_two_sample(a, b).p_value, 1e-3);
}
