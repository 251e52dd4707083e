#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sddflow/error.hpp"

namespace sddflow {

using VertexId = std::int32_t;
using EdgeId = std::int32_t;

// Signed per-edge values w.r.t. the graph's fixed orientation (tail -> head).
using FlowVector = std::vector<double>;
// Net current injected at each vertex.
using DemandVector = std::vector<double>;
// Vertex potentials.
using VoltageVector = std::vector<double>;

struct RawEdge {
  VertexId a;
  VertexId b;
  double resistance;
};

struct Edge {
  VertexId tail;
  VertexId head;
  double resistance;

  double conductance() const { return 1.0 / resistance; }
  VertexId other(VertexId v) const { return v == tail ? head : tail; }
  bool operator==(const Edge&) const = default;
};

struct Incidence {
  VertexId neighbor;
  EdgeId edge;
};

// Undirected graph with positive resistances and one fixed orientation per
// edge. Immutable once built; at most one edge per unordered vertex pair and
// every edge is stored as (min id, max id).
class WeightedGraph {
 public:
  WeightedGraph() = default;

  VertexId num_vertices() const { return n_; }
  EdgeId num_edges() const { return static_cast<EdgeId>(edges_.size()); }

  const Edge& edge(EdgeId e) const { return edges_[static_cast<std::size_t>(e)]; }
  std::span<const Edge> edges() const { return edges_; }
  double resistance(EdgeId e) const { return edge(e).resistance; }

  std::span<const Incidence> incident(VertexId v) const {
    const auto begin = adjacency_offsets_[static_cast<std::size_t>(v)];
    const auto end = adjacency_offsets_[static_cast<std::size_t>(v) + 1];
    return std::span<const Incidence>(adjacency_).subspan(begin, end - begin);
  }

  // Same vertices, edges and orientation with every resistance replaced.
  WeightedGraph with_resistances(std::span<const double> resistances) const {
    if (resistances.size() != edges_.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "resistance vector length differs from edge count");
    }
    WeightedGraph g = *this;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const double r = resistances[e];
      if (!(r > 0.0) || !std::isfinite(r)) {
        throw Error(ErrorCode::kNonpositiveResistance, "edge " + std::to_string(e));
      }
      g.edges_[e].resistance = r;
    }
    return g;
  }

  bool operator==(const WeightedGraph& other) const {
    return n_ == other.n_ && edges_ == other.edges_;
  }

  friend WeightedGraph build_graph(VertexId n, std::span<const RawEdge> raw_edges);

 private:
  void build_adjacency() {
    adjacency_offsets_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (const auto& e : edges_) {
      ++adjacency_offsets_[static_cast<std::size_t>(e.tail) + 1];
      ++adjacency_offsets_[static_cast<std::size_t>(e.head) + 1];
    }
    std::partial_sum(adjacency_offsets_.begin(), adjacency_offsets_.end(), adjacency_offsets_.begin());
    adjacency_.resize(edges_.size() * 2);
    std::vector<std::size_t> cursor(adjacency_offsets_.begin(), adjacency_offsets_.end() - 1);
    for (EdgeId id = 0; id < num_edges(); ++id) {
      const auto& e = edge(id);
      adjacency_[cursor[static_cast<std::size_t>(e.tail)]++] = {e.head, id};
      adjacency_[cursor[static_cast<std::size_t>(e.head)]++] = {e.tail, id};
    }
  }

  VertexId n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> adjacency_offsets_{0};
  std::vector<Incidence> adjacency_;
};

// Parallel edges are merged by adding conductances; edge order follows the
// first occurrence of each unordered pair.
inline WeightedGraph build_graph(VertexId n, std::span<const RawEdge> raw_edges) {
  if (n < 0) throw Error(ErrorCode::kVertexOutOfRange, "negative vertex count");
  WeightedGraph g;
  g.n_ = n;
  std::unordered_map<std::uint64_t, std::size_t> index;
  std::vector<double> conductance;
  for (std::size_t i = 0; i < raw_edges.size(); ++i) {
    const auto& raw = raw_edges[i];
    if (raw.a < 0 || raw.a >= n || raw.b < 0 || raw.b >= n) {
      throw Error(ErrorCode::kVertexOutOfRange, "edge " + std::to_string(i) + " (" + std::to_string(raw.a) +
                                                    ", " + std::to_string(raw.b) + ")");
    }
    if (raw.a == raw.b) {
      throw Error(ErrorCode::kSelfLoop, "edge " + std::to_string(i) + " at vertex " + std::to_string(raw.a));
    }
    if (!(raw.resistance > 0.0) || !std::isfinite(raw.resistance)) {
      throw Error(ErrorCode::kNonpositiveResistance, "edge " + std::to_string(i));
    }
    const VertexId lo = std::min(raw.a, raw.b);
    const VertexId hi = std::max(raw.a, raw.b);
    const auto key = (static_cast<std::uint64_t>(lo) << 32) | static_cast<std::uint32_t>(hi);
    auto [it, inserted] = index.try_emplace(key, g.edges_.size());
    if (inserted) {
      g.edges_.push_back({lo, hi, raw.resistance});
      conductance.push_back(1.0 / raw.resistance);
    } else {
      conductance[it->second] += 1.0 / raw.resistance;
      g.edges_[it->second].resistance = 1.0 / conductance[it->second];
    }
  }
  g.build_adjacency();
  return g;
}

inline WeightedGraph build_graph(VertexId n, std::initializer_list<RawEdge> raw_edges) {
  return build_graph(n, std::span<const RawEdge>(raw_edges.begin(), raw_edges.size()));
}

namespace detail {

inline void require_size(std::size_t actual, std::size_t expected, const char* what) {
  if (actual != expected) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + " has length " + std::to_string(actual) +
                                                   ", expected " + std::to_string(expected));
  }
}

inline double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace detail

// B^T f: net flow leaving each vertex along its edges (outflow - inflow).
inline std::vector<double> divergence(const WeightedGraph& g, std::span<const double> f) {
  detail::require_size(f.size(), static_cast<std::size_t>(g.num_edges()), "flow");
  std::vector<double> out(static_cast<std::size_t>(g.num_vertices()), 0.0);
  for (EdgeId id = 0; id < g.num_edges(); ++id) {
    const auto& e = g.edge(id);
    out[static_cast<std::size_t>(e.tail)] += f[static_cast<std::size_t>(id)];
    out[static_cast<std::size_t>(e.head)] -= f[static_cast<std::size_t>(id)];
  }
  return out;
}

// R^-1 B x: the flow induced by potentials x.
inline FlowVector induced_flow(const WeightedGraph& g, std::span<const double> x) {
  detail::require_size(x.size(), static_cast<std::size_t>(g.num_vertices()), "voltage");
  FlowVector f(static_cast<std::size_t>(g.num_edges()));
  for (EdgeId id = 0; id < g.num_edges(); ++id) {
    const auto& e = g.edge(id);
    f[static_cast<std::size_t>(id)] =
        (x[static_cast<std::size_t>(e.tail)] - x[static_cast<std::size_t>(e.head)]) / e.resistance;
  }
  return f;
}

inline std::vector<double> apply_laplacian(const WeightedGraph& g, std::span<const double> x) {
  return divergence(g, induced_flow(g, x));
}

inline double energy(const WeightedGraph& g, std::span<const double> f) {
  detail::require_size(f.size(), static_cast<std::size_t>(g.num_edges()), "flow");
  double total = 0.0;
  for (EdgeId id = 0; id < g.num_edges(); ++id) {
    const double x = f[static_cast<std::size_t>(id)];
    total += g.resistance(id) * x * x;
  }
  return total;
}

// x^T L x evaluated edge by edge.
inline double laplacian_quadratic_form(const WeightedGraph& g, std::span<const double> x) {
  detail::require_size(x.size(), static_cast<std::size_t>(g.num_vertices()), "voltage");
  double total = 0.0;
  for (const auto& e : g.edges()) {
    const double d = x[static_cast<std::size_t>(e.tail)] - x[static_cast<std::size_t>(e.head)];
    total += d * d / e.resistance;
  }
  return total;
}

// 2 v^T chi - v^T L v; a lower bound on the optimal energy for every v.
inline double dual_energy(const WeightedGraph& g, std::span<const double> v, std::span<const double> chi) {
  detail::require_size(chi.size(), static_cast<std::size_t>(g.num_vertices()), "demand");
  const double linear = std::inner_product(v.begin(), v.end(), chi.begin(), 0.0);
  return 2.0 * linear - laplacian_quadratic_form(g, v);
}

struct FeasibilityCheck {
  bool feasible;
  double max_residual;
};

inline FeasibilityCheck check_feasible(const WeightedGraph& g, std::span<const double> f,
                                       std::span<const double> chi, double tol) {
  detail::require_size(chi.size(), static_cast<std::size_t>(g.num_vertices()), "demand");
  const auto div = divergence(g, f);
  double worst = 0.0;
  for (std::size_t i = 0; i < div.size(); ++i) worst = std::max(worst, std::abs(div[i] - chi[i]));
  return {worst <= tol, worst};
}

inline double default_feasibility_tolerance(std::span<const double> chi) {
  return 1e-9 * (1.0 + detail::max_abs(chi));
}

inline double duality_gap(const WeightedGraph& g, std::span<const double> f, std::span<const double> v,
                          std::span<const double> chi, double tol) {
  const auto check = check_feasible(g, f, chi, tol);
  if (!check.feasible) {
    throw Error(ErrorCode::kInfeasibleFlow, "max residual " + std::to_string(check.max_residual));
  }
  return energy(g, f) - dual_energy(g, v, chi);
}

inline double duality_gap(const WeightedGraph& g, std::span<const double> f, std::span<const double> v,
                          std::span<const double> chi) {
  return duality_gap(g, f, v, chi, default_feasibility_tolerance(chi));
}

struct ComponentLabeling {
  std::vector<VertexId> label;  // component index per vertex, numbered by lowest member
  VertexId count = 0;
};

inline ComponentLabeling connected_components(const WeightedGraph& g) {
  ComponentLabeling out;
  out.label.assign(static_cast<std::size_t>(g.num_vertices()), -1);
  std::vector<VertexId> stack;
  for (VertexId s = 0; s < g.num_vertices(); ++s) {
    if (out.label[static_cast<std::size_t>(s)] >= 0) continue;
    out.label[static_cast<std::size_t>(s)] = out.count;
    stack.push_back(s);
    while (!stack.empty()) {
      const VertexId u = stack.back();
      stack.pop_back();
      for (const auto& inc : g.incident(u)) {
        auto& l = out.label[static_cast<std::size_t>(inc.neighbor)];
        if (l < 0) {
          l = out.count;
          stack.push_back(inc.neighbor);
        }
      }
    }
    ++out.count;
  }
  return out;
}

}  // namespace sddflow
