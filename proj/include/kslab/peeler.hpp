#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <utility>
#include <vector>

#include "kslab/errors.hpp"
#include "kslab/graph.hpp"
#include "kslab/rng.hpp"

namespace kslab {

struct XvsState {
  std::int64_t x = 0;
  std::int64_t v = 0;
  std::int64_t s = 0;
  std::int64_t m = 0;
  bool operator==(const XvsState&) const = default;
};

struct StepDelta {
  Vertex leaf = 0;
  Vertex neighbour = 0;
  std::uint32_t isolated_created = 0;
  std::uint64_t edges_removed = 0;
  XvsState state;
};

struct KsTrace {
  std::vector<XvsState> steps;  // steps[k] is the state after k peels
  std::int64_t extinction_step = 0;
  std::uint64_t n = 0;
  std::uint64_t m = 0;
};

struct PeelCertificate {
  std::vector<Vertex> independent_set;
  std::vector<std::pair<Vertex, Vertex>> matching;  // (leaf, neighbour)
};

/// Leaf-removal chain on a multigraph the object owns.
///
/// Adjacency is a static CSR of (neighbour, edge) entries built once; dead
/// entries are skipped on scan. Every vertex list is scanned at most twice
/// (when the vertex is removed as a neighbour, and once to find its last
/// edge as a leaf), so no compaction is needed for O(m) total work.
class KarpSipser {
 public:
  explicit KarpSipser(Multigraph g) : g_(std::move(g)) {
    const std::size_t n = g_.n_vertices();
    offset_.assign(n + 1, 0);
    g_.for_each_alive_edge([&](EdgeId, const Edge& e) {
      ++offset_[e.u + 1];
      if (!e.is_loop()) ++offset_[e.v + 1];
    });
    for (std::size_t i = 0; i < n; ++i) offset_[i + 1] += offset_[i];
    adj_.resize(offset_[n]);
    std::vector<std::size_t> fill(offset_.begin(), offset_.end() - 1);
    g_.for_each_alive_edge([&](EdgeId id, const Edge& e) {
      adj_[fill[e.u]++] = {e.v, id};
      if (!e.is_loop()) adj_[fill[e.v]++] = {e.u, id};
    });

    leaf_pos_.assign(n, kNotLeaf);
    for (Vertex v = 0; v < n; ++v) {
      if (!g_.alive(v)) continue;
      const auto d = g_.degree(v);
      if (d == 0) {
        g_.remove_vertex(v);
        cert_.independent_set.push_back(v);
        ++isolated_at_start_;
      } else if (d == 1) {
        push_leaf(v);
      } else {
        ++heavy_;
      }
    }
  }

  bool has_leaf() const { return !leaves_.empty(); }

  XvsState state() const {
    const auto x = static_cast<std::int64_t>(leaves_.size());
    const auto v = static_cast<std::int64_t>(heavy_);
    const auto m = static_cast<std::int64_t>(g_.n_alive_edges());
    return {x, v, 2 * m - x - 2 * v, m};
  }

  StepDelta step(Rng& rng) {
    require(has_leaf(), ErrorCode::kNoLeafPresent, "graph has no leaf");
    const Vertex leaf = leaves_[uniform_index(rng, leaves_.size())];
    Vertex nb = leaf;
    for (std::size_t i = offset_[leaf]; i < offset_[leaf + 1]; ++i) {
      if (g_.edge_alive(adj_[i].edge)) {
        nb = adj_[i].nbr;
        break;
      }
    }
    StepDelta delta{leaf, nb, 0, 0, {}};
    const std::uint32_t nb_degree = g_.degree(nb);

    drop_class(leaf, 1);
    drop_class(nb, nb_degree);
    for (std::size_t i = offset_[nb]; i < offset_[nb + 1]; ++i) {
      const auto [y, e] = adj_[i];
      if (!g_.edge_alive(e)) continue;
      g_.remove_edge(e);
      ++delta.edges_removed;
      if (y == nb || y == leaf) continue;
      const auto d = g_.degree(y);
      if (d == 0) {
        drop_class(y, 1);
        g_.remove_vertex(y);
        cert_.independent_set.push_back(y);
        ++delta.isolated_created;
      } else if (d == 1) {
        if (leaf_pos_[y] == kNotLeaf) {
          --heavy_;
          push_leaf(y);
        }
      }
    }
    g_.remove_vertex(leaf);
    g_.remove_vertex(nb);
    cert_.independent_set.push_back(leaf);
    cert_.matching.emplace_back(leaf, nb);
    vertices_peeled_ += 2 + delta.isolated_created;
    delta.state = state();
    return delta;
  }

  const Multigraph& graph() const { return g_; }
  Multigraph release_graph() { return std::move(g_); }
  const PeelCertificate& certificate() const { return cert_; }
  PeelCertificate release_certificate() { return std::move(cert_); }
  std::uint64_t isolated_at_start() const { return isolated_at_start_; }
  /// Leaves, their neighbours and vertices isolated by peeling.
  std::uint64_t vertices_peeled() const { return vertices_peeled_; }

 private:
  struct Slot {
    Vertex nbr;
    EdgeId edge;
  };
  static constexpr std::uint32_t kNotLeaf = UINT32_MAX;

  void push_leaf(Vertex v) {
    leaf_pos_[v] = static_cast<std::uint32_t>(leaves_.size());
    leaves_.push_back(v);
  }
  void pop_leaf(Vertex v) {
    const auto pos = leaf_pos_[v];
    const Vertex last = leaves_.back();
    leaves_[pos] = last;
    leaf_pos_[last] = pos;
    leaves_.pop_back();
    leaf_pos_[v] = kNotLeaf;
  }
  // Removes v from the class (leaf or heavy) it belonged to at degree d.
  void drop_class(Vertex v, std::uint32_t d) {
    if (leaf_pos_[v] != kNotLeaf) {
      pop_leaf(v);
    } else if (d >= 2) {
      --heavy_;
    }
  }

  Multigraph g_;
  std::vector<std::size_t> offset_;
  std::vector<Slot> adj_;
  std::vector<Vertex> leaves_;
  std::vector<std::uint32_t> leaf_pos_;
  std::uint64_t heavy_ = 0;
  std::uint64_t isolated_at_start_ = 0;
  std::uint64_t vertices_peeled_ = 0;
  PeelCertificate cert_;
};

/// One peel applied in place to g.
inline StepDelta ks_step(Multigraph& g, Rng& rng) {
  KarpSipser ks(std::move(g));
  try {
    auto delta = ks.step(rng);
    g = ks.release_graph();
    return delta;
  } catch (...) {
    g = ks.release_graph();
    throw;
  }
}

struct KsRun {
  Multigraph core;
  KsTrace trace;
  PeelCertificate certificate;
  std::uint64_t isolated_at_start = 0;
  std::uint64_t vertices_peeled = 0;
};

/// Peels until no leaf is left. The returned core keeps the original labels;
/// peeled vertices are marked dead. Trace steps are stored only on request,
/// the extinction step always.
inline KsRun run_karp_sipser(Multigraph g, Rng& rng, bool record_trace) {
  KsRun run;
  run.trace.n = g.n_vertices();
  run.trace.m = g.n_alive_edges();
  KarpSipser ks(std::move(g));
  if (record_trace) {
    run.trace.steps.reserve(static_cast<std::size_t>(0.45 * static_cast<double>(run.trace.n)) + 64);
    run.trace.steps.push_back(ks.state());
  }
  std::int64_t k = 0;
  while (ks.has_leaf()) {
    const auto delta = ks.step(rng);
    ++k;
    if (record_trace) run.trace.steps.push_back(delta.state);
  }
  run.trace.extinction_step = k;
  run.isolated_at_start = ks.isolated_at_start();
  run.vertices_peeled = ks.vertices_peeled();
  run.certificate = ks.release_certificate();
  run.core = ks.release_graph();
  return run;
}

struct CoreSummary {
  std::map<std::uint32_t, std::uint64_t> degree_counts;
  std::uint64_t n_core_vertices = 0;
  std::uint64_t n_core_edges = 0;
  bool is_simple_core = true;

  std::uint64_t count(std::uint32_t d) const {
    auto it = degree_counts.find(d);
    return it == degree_counts.end() ? 0 : it->second;
  }
  std::uint64_t count_at_least(std::uint32_t d) const {
    std::uint64_t c = 0;
    for (auto it = degree_counts.lower_bound(d); it != degree_counts.end(); ++it) c += it->second;
    return c;
  }
  bool operator==(const CoreSummary&) const = default;
};

inline CoreSummary core_summary(const Multigraph& core) {
  CoreSummary out;
  for (Vertex v = 0; v < core.n_vertices(); ++v) {
    if (!core.alive(v)) continue;
    const auto d = core.degree(v);
    require(d >= 2, ErrorCode::kHasLeafOrIsolatedVertex,
            "vertex " + std::to_string(v + 1) + " has degree " + std::to_string(d));
    ++out.degree_counts[d];
    ++out.n_core_vertices;
  }
  out.n_core_edges = core.n_alive_edges();
  out.is_simple_core = is_simple(core);
  return out;
}

inline void write_trace_csv(const KsTrace& trace, std::ostream& out) {
  out << "k,X,V,S\n";
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& st = trace.steps[k];
    out << k << ',' << st.x << ',' << st.v << ',' << st.s << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "failed writing trace");
}

}  // namespace kslab
