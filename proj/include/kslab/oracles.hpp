#pragma once

// Brute-force reference implementations for small graphs, used as test oracles.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "kslab/graph.hpp"
#include "kslab/rng.hpp"

namespace kslab::oracle {

/// Exact maximum independent set size over alive vertices, n <= 64.
/// A vertex with a loop is never independent.
inline int max_independent_set(const Multigraph& g) {
  const std::size_t n = g.n_vertices();
  std::vector<std::uint64_t> adj(n, 0);
  std::uint64_t forbidden = 0, alive = 0;
  for (Vertex v = 0; v < n; ++v) {
    if (g.alive(v)) alive |= 1ULL << v;
  }
  g.for_each_alive_edge([&](EdgeId, const Edge& e) {
    if (e.is_loop()) {
      forbidden |= 1ULL << e.u;
    } else {
      adj[e.u] |= 1ULL << e.v;
      adj[e.v] |= 1ULL << e.u;
    }
  });
  std::function<int(std::uint64_t)> best = [&](std::uint64_t cand) -> int {
    if (cand == 0) return 0;
    // a vertex of degree <= 1 within cand can always be taken
    for (std::uint64_t rest = cand; rest;) {
      const int v = __builtin_ctzll(rest);
      rest &= rest - 1;
      if (__builtin_popcountll(adj[v] & cand) <= 1) return 1 + best(cand & ~(adj[v] | (1ULL << v)));
    }
    int v = __builtin_ctzll(cand);
    int deg = -1;
    for (std::uint64_t rest = cand; rest;) {
      const int u = __builtin_ctzll(rest);
      rest &= rest - 1;
      const int d = __builtin_popcountll(adj[u] & cand);
      if (d > deg) deg = d, v = u;
    }
    const int take = 1 + best(cand & ~(adj[v] | (1ULL << v)));
    const int skip = best(cand & ~(1ULL << v));
    return std::max(take, skip);
  };
  return best(alive & ~forbidden);
}

namespace detail {

inline std::vector<std::vector<int>> multiplicity_matrix(const Multigraph& g, std::vector<Vertex>& ids) {
  ids.clear();
  std::vector<int> index(g.n_vertices(), -1);
  for (Vertex v = 0; v < g.n_vertices(); ++v) {
    if (g.alive(v)) {
      index[v] = static_cast<int>(ids.size());
      ids.push_back(v);
    }
  }
  std::vector<std::vector<int>> mult(ids.size(), std::vector<int>(ids.size(), 0));
  g.for_each_alive_edge([&](EdgeId, const Edge& e) {
    const int a = index[e.u], b = index[e.v];
    ++mult[a][b];
    if (a != b) ++mult[b][a];
  });
  return mult;
}

// Colour refinement on the weighted adjacency matrix; colours are canonical
// (comparable across graphs) because each round relabels by sorted signature.
inline std::vector<int> refine(const std::vector<std::vector<int>>& mult, std::vector<std::vector<int>>* history) {
  const std::size_t n = mult.size();
  std::vector<int> colour(n, 0);
  for (std::size_t round = 0; round <= n; ++round) {
    std::vector<std::vector<int>> sig(n);
    for (std::size_t v = 0; v < n; ++v) {
      sig[v].push_back(colour[v]);
      sig[v].push_back(mult[v][v]);
      std::vector<std::pair<int, int>> nb;
      for (std::size_t u = 0; u < n; ++u) {
        if (u != v && mult[v][u] > 0) nb.emplace_back(colour[u], mult[v][u]);
      }
      std::sort(nb.begin(), nb.end());
      for (auto [c, m] : nb) {
        sig[v].push_back(c);
        sig[v].push_back(m);
      }
    }
    std::vector<std::vector<int>> keys = sig;
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<int> next(n);
    for (std::size_t v = 0; v < n; ++v) {
      next[v] = static_cast<int>(std::lower_bound(keys.begin(), keys.end(), sig[v]) - keys.begin());
    }
    if (history) {
      for (const auto& k : keys) history->push_back(k);
      history->push_back({-1});
    }
    const bool stable = std::set<int>(next.begin(), next.end()).size() == std::set<int>(colour.begin(), colour.end()).size();
    colour = next;
    if (stable) break;
  }
  return colour;
}

}  // namespace detail

/// Exact isomorphism of the alive parts of two multigraphs (loops and
/// multiplicities respected). Colour refinement prunes, backtracking decides.
inline bool isomorphic(const Multigraph& a, const Multigraph& b) {
  std::vector<Vertex> ia, ib;
  const auto ma = detail::multiplicity_matrix(a, ia);
  const auto mb = detail::multiplicity_matrix(b, ib);
  if (ma.size() != mb.size() || a.n_alive_edges() != b.n_alive_edges()) return false;
  std::vector<std::vector<int>> ha, hb;
  const auto ca = detail::refine(ma, &ha);
  const auto cb = detail::refine(mb, &hb);
  if (ha != hb) return false;
  const std::size_t n = ma.size();
  // map vertices of a in order of increasing colour-class size
  std::map<int, int> class_size;
  for (int c : ca) ++class_size[c];
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::pair(class_size[ca[x]], ca[x]) < std::pair(class_size[ca[y]], ca[y]);
  });
  std::vector<int> image(n, -1);
  std::vector<char> used(n, 0);
  std::function<bool(std::size_t)> extend = [&](std::size_t depth) -> bool {
    if (depth == n) return true;
    const std::size_t v = order[depth];
    for (std::size_t w = 0; w < n; ++w) {
      if (used[w] || cb[w] != ca[v] || mb[w][w] != ma[v][v]) continue;
      bool ok = true;
      for (std::size_t d = 0; d < depth && ok; ++d) {
        const std::size_t u = order[d];
        ok = ma[v][u] == mb[w][image[u]];
      }
      if (!ok) continue;
      image[v] = static_cast<int>(w);
      used[w] = 1;
      if (extend(depth + 1)) return true;
      used[w] = 0;
    }
    image[v] = -1;
    return false;
  };
  return extend(0);
}

/// Labelled simple graph on n vertices whose edge set is the bitmask over the
/// pairs (i<j) in lexicographic order.
inline Multigraph graph_from_mask(int n, std::uint64_t mask) {
  Multigraph g(n);
  int bit = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++bit) {
      if (mask >> bit & 1ULL) g.add_edge(i, j);
    }
  }
  return g;
}

/// Simple graph with independent edges of probability p.
inline Multigraph random_simple_graph(int n, double p, Rng& rng) {
  Multigraph g(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (uniform01(rng) < p) g.add_edge(i, j);
    }
  }
  return g;
}

inline bool connected(const Multigraph& g) {
  const std::size_t n = g.n_vertices();
  if (n == 0) return true;
  std::vector<int> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  g.for_each_alive_edge([&](EdgeId, const Edge& e) { parent[find(e.u)] = find(e.v); });
  for (std::size_t i = 1; i < n; ++i) {
    if (find(static_cast<int>(i)) != find(0)) return false;
  }
  return true;
}

}  // namespace kslab::oracle
