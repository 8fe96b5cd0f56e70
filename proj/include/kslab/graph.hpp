#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kslab/errors.hpp"

namespace kslab {

using Vertex = std::uint32_t;
using EdgeId = std::uint32_t;

struct Edge {
  Vertex u = 0;
  Vertex v = 0;
  bool is_loop() const { return u == v; }
};

/// Labelled multigraph with loops and multi-edges. Vertices are 0-based in
/// memory and 1-based in the text format. Removal is in place: edges and
/// vertices are flagged dead rather than erased, so ids stay stable.
class Multigraph {
 public:
  Multigraph() = default;
  explicit Multigraph(std::size_t n_vertices)
      : degree_(n_vertices, 0), vertex_alive_(n_vertices, 1), alive_vertices_(n_vertices) {}

  std::size_t n_vertices() const { return degree_.size(); }
  std::size_t n_alive_vertices() const { return alive_vertices_; }
  std::size_t n_edges() const { return edges_.size(); }
  std::size_t n_alive_edges() const { return alive_edges_; }

  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  bool edge_alive(EdgeId e) const { return edge_alive_[e] != 0; }
  std::uint32_t degree(Vertex v) const { return degree_[v]; }
  bool alive(Vertex v) const { return vertex_alive_[v] != 0; }

  void reserve_edges(std::size_t m) {
    edges_.reserve(m);
    edge_alive_.reserve(m);
  }

  EdgeId add_edge(Vertex u, Vertex v) {
    require(u < n_vertices() && v < n_vertices(), ErrorCode::kInvalidArgument, "edge endpoint out of range");
    require(alive(u) && alive(v), ErrorCode::kInvalidArgument, "edge endpoint is dead");
    edges_.push_back({u, v});
    edge_alive_.push_back(1);
    ++degree_[u];
    ++degree_[v];
    ++alive_edges_;
    return static_cast<EdgeId>(edges_.size() - 1);
  }

  void remove_edge(EdgeId e) {
    if (!edge_alive_[e]) return;
    edge_alive_[e] = 0;
    --degree_[edges_[e].u];
    --degree_[edges_[e].v];
    --alive_edges_;
  }

  /// Removes a vertex whose edges are all gone.
  void remove_vertex(Vertex v) {
    require(degree_[v] == 0, ErrorCode::kInvalidArgument, "only isolated vertices can be removed");
    if (!vertex_alive_[v]) return;
    vertex_alive_[v] = 0;
    --alive_vertices_;
  }

  template <typename Fn>
  void for_each_alive_edge(Fn&& fn) const {
    for (EdgeId e = 0; e < edges_.size(); ++e) {
      if (edge_alive_[e]) fn(e, edges_[e]);
    }
  }

  /// Alive part relabelled 0..k-1 in increasing label order.
  Multigraph compacted() const {
    std::vector<Vertex> relabel(n_vertices(), 0);
    Vertex next = 0;
    for (Vertex v = 0; v < n_vertices(); ++v) {
      if (alive(v)) relabel[v] = next++;
    }
    Multigraph out(next);
    out.reserve_edges(alive_edges_);
    for_each_alive_edge([&](EdgeId, const Edge& e) { out.add_edge(relabel[e.u], relabel[e.v]); });
    return out;
  }

 private:
  std::vector<Edge> edges_;
  std::vector<std::uint8_t> edge_alive_;
  std::vector<std::uint32_t> degree_;
  std::vector<std::uint8_t> vertex_alive_;
  std::size_t alive_edges_ = 0;
  std::size_t alive_vertices_ = 0;
};

/// Degree histogram with the (X, V, S, H) statistics of the leaf-removal chain.
struct DegreeSequence {
  std::map<std::uint32_t, std::uint64_t> counts;

  std::uint64_t count(std::uint32_t degree) const {
    auto it = counts.find(degree);
    return it == counts.end() ? 0 : it->second;
  }
  std::uint64_t n_leaves() const { return count(1); }
  std::uint64_t n_heavy() const {
    std::uint64_t v = 0;
    for (auto [d, c] : counts) {
      if (d >= 2) v += c;
    }
    return v;
  }
  std::uint64_t half_edges() const {
    std::uint64_t h = 0;
    for (auto [d, c] : counts) h += static_cast<std::uint64_t>(d) * c;
    return h;
  }
  std::uint64_t surplus() const { return half_edges() - n_leaves() - 2 * n_heavy(); }
};

inline DegreeSequence degree_histogram(const Multigraph& g) {
  DegreeSequence seq;
  for (Vertex v = 0; v < g.n_vertices(); ++v) {
    if (g.alive(v)) ++seq.counts[g.degree(v)];
  }
  return seq;
}

/// True iff the alive part has no loop and no repeated vertex pair.
inline bool is_simple(const Multigraph& g) {
  std::vector<std::uint64_t> pairs;
  pairs.reserve(g.n_alive_edges());
  bool loop = false;
  g.for_each_alive_edge([&](EdgeId, const Edge& e) {
    if (e.is_loop()) loop = true;
    const auto a = std::min(e.u, e.v), b = std::max(e.u, e.v);
    pairs.push_back((static_cast<std::uint64_t>(a) << 32) | b);
  });
  if (loop) return false;
  std::sort(pairs.begin(), pairs.end());
  return std::adjacent_find(pairs.begin(), pairs.end()) == pairs.end();
}

/// Asymptotic probability that a configuration model with this degree
/// sequence is simple: exp(-mu^2/4 + 1/4), mu = sum i^2 d_i / sum i d_i.
inline double simple_probability(const DegreeSequence& degrees) {
  double first = 0, second = 0;
  for (auto [d, c] : degrees.counts) {
    first += static_cast<double>(d) * static_cast<double>(c);
    second += static_cast<double>(d) * d * static_cast<double>(c);
  }
  require(first > 0, ErrorCode::kEmptyDegreeSequence, "degree sequence has no half-edges");
  const double mu = second / first;
  return std::exp(-mu * mu / 4.0 + 0.25);
}

// Text edge list: header "n m", then one "u v" line per alive edge, 1-based.
inline void write_edge_list(const Multigraph& g, std::ostream& out) {
  out << g.n_vertices() << ' ' << g.n_alive_edges() << '\n';
  g.for_each_alive_edge([&](EdgeId, const Edge& e) { out << e.u + 1 << ' ' << e.v + 1 << '\n'; });
  if (!out) throw Error(ErrorCode::kIoFailure, "failed writing edge list");
}

inline Multigraph read_edge_list(std::istream& in) {
  std::string line;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      const auto pos = line.find_first_not_of(" \t\r");
      if (pos != std::string::npos && line[pos] != '#') return true;
    }
    return false;
  };
  if (!next_line()) throw Error(ErrorCode::kIoFailure, "edge list is missing its header");
  std::uint64_t n = 0, m = 0;
  {
    std::istringstream header(line);
    if (!(header >> n >> m)) throw Error(ErrorCode::kIoFailure, "malformed edge list header: " + line);
  }
  Multigraph g(n);
  g.reserve_edges(m);
  for (std::uint64_t i = 0; i < m; ++i) {
    if (!next_line()) throw Error(ErrorCode::kIoFailure, "edge list ended before " + std::to_string(m) + " edges");
    std::istringstream row(line);
    std::uint64_t u = 0, v = 0;
    if (!(row >> u >> v) || u < 1 || v < 1 || u > n || v > n) {
      throw Error(ErrorCode::kIoFailure, "malformed edge line: " + line);
    }
    g.add_edge(static_cast<Vertex>(u - 1), static_cast<Vertex>(v - 1));
  }
  return g;
}

}  // namespace kslab
