#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sddflow/error.hpp"
#include "sddflow/graph.hpp"
#include "sddflow/solver.hpp"

namespace sddflow {

struct MatrixEntry {
  VertexId row;
  VertexId col;
  double value;
  bool operator==(const MatrixEntry&) const = default;
};

// Sparse square matrix kept as row-major sorted entries with duplicates
// summed and explicit zeros dropped. Both triangles are stored.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  SparseMatrix(VertexId n, std::span<const MatrixEntry> entries) : n_(n) {
    if (n < 0) throw Error(ErrorCode::kDimensionMismatch, "negative dimension");
    std::map<std::pair<VertexId, VertexId>, double> acc;
    for (const auto& e : entries) {
      if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n) {
        throw Error(ErrorCode::kVertexOutOfRange, "entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) + ")");
      }
      if (!std::isfinite(e.value)) throw Error(ErrorCode::kParseError, "non-finite matrix entry");
      acc[{e.row, e.col}] += e.value;
    }
    for (const auto& [key, value] : acc) {
      if (value != 0.0) entries_.push_back({key.first, key.second, value});
    }
  }

  SparseMatrix(VertexId n, std::initializer_list<MatrixEntry> entries)
      : SparseMatrix(n, std::span<const MatrixEntry>(entries.begin(), entries.size())) {}

  static SparseMatrix from_dense(const std::vector<std::vector<double>>& rows) {
    std::vector<MatrixEntry> e;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw Error(ErrorCode::kDimensionMismatch, "matrix is not square");
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        e.push_back({static_cast<VertexId>(i), static_cast<VertexId>(j), rows[i][j]});
      }
    }
    return SparseMatrix(static_cast<VertexId>(rows.size()), e);
  }

  VertexId dimension() const { return n_; }
  std::span<const MatrixEntry> entries() const { return entries_; }

  double at(VertexId i, VertexId j) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{i, j}, [](const MatrixEntry& e, auto key) {
      return std::pair{e.row, e.col} < key;
    });
    return (it != entries_.end() && it->row == i && it->col == j) ? it->value : 0.0;
  }

  std::vector<double> multiply(std::span<const double> x) const {
    detail::require_size(x.size(), static_cast<std::size_t>(n_), "vector");
    std::vector<double> y(static_cast<std::size_t>(n_), 0.0);
    for (const auto& e : entries_) y[static_cast<std::size_t>(e.row)] += e.value * x[static_cast<std::size_t>(e.col)];
    return y;
  }

  bool operator==(const SparseMatrix&) const = default;

 private:
  VertexId n_ = 0;
  std::vector<MatrixEntry> entries_;
};

struct SddSystem {
  SparseMatrix a;
  std::vector<double> b;
};

// Throws NotSymmetric or NotDiagonallyDominant (naming the worst row).
inline void validate_sdd(const SparseMatrix& a) {
  for (const auto& e : a.entries()) {
    if (a.at(e.col, e.row) != e.value) {
      throw Error(ErrorCode::kNotSymmetric, "A(" + std::to_string(e.row) + "," + std::to_string(e.col) +
                                                ") != A(" + std::to_string(e.col) + "," + std::to_string(e.row) + ")");
    }
  }
  const auto n = static_cast<std::size_t>(a.dimension());
  std::vector<double> diag(n, 0.0);
  std::vector<double> off(n, 0.0);
  for (const auto& e : a.entries()) {
    (e.row == e.col ? diag : off)[static_cast<std::size_t>(e.row)] += e.row == e.col ? e.value : std::abs(e.value);
  }
  double worst = 0.0;
  std::size_t worst_row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = std::max(std::abs(diag[i]), off[i]);
    const double deficit = off[i] - diag[i];
    if (deficit > 1e-12 * scale && deficit / std::max(scale, 1e-300) > worst) {
      worst = deficit / std::max(scale, 1e-300);
      worst_row = i;
    }
  }
  if (worst > 0.0) {
    throw Error(ErrorCode::kNotDiagonallyDominant,
                "row " + std::to_string(worst_row) + ": diagonal " + std::to_string(diag[worst_row]) +
                    " < off-diagonal sum " + std::to_string(off[worst_row]));
  }
}

// A = D1 + Ap + An + D2 with D1 the off-diagonal absolute row sums, Ap / An
// the positive / negative off-diagonals and D2 >= 0 the remaining diagonal.
struct SddDecomposition {
  std::vector<double> d1;
  std::vector<MatrixEntry> positive;  // off-diagonal entries > 0, both triangles
  std::vector<MatrixEntry> negative;  // off-diagonal entries < 0, both triangles
  std::vector<double> d2;
};

inline SddDecomposition decompose(const SparseMatrix& a) {
  const auto n = static_cast<std::size_t>(a.dimension());
  SddDecomposition d;
  d.d1.assign(n, 0.0);
  d.d2.assign(n, 0.0);
  std::vector<double> diag(n, 0.0);
  for (const auto& e : a.entries()) {
    if (e.row == e.col) {
      diag[static_cast<std::size_t>(e.row)] = e.value;
      continue;
    }
    d.d1[static_cast<std::size_t>(e.row)] += std::abs(e.value);
    (e.value > 0.0 ? d.positive : d.negative).push_back(e);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double excess = diag[i] - d.d1[i];
    const double scale = std::max(std::abs(diag[i]), d.d1[i]);
    if (excess < -1e-12 * scale) {
      throw Error(ErrorCode::kDecompositionInvariantViolated, "negative excess diagonal in row " + std::to_string(i));
    }
    d.d2[i] = std::max(0.0, excess);
  }
  return d;
}

struct ReductionArtifacts {
  SddDecomposition parts;
  // Laplacian of [[D1 + D2/2 + An, -D2/2 - Ap], [-D2/2 - Ap, D1 + D2/2 + An]]
  // as a graph on 2n vertices; vertex i and i + n are the two copies of i.
  WeightedGraph augmented;
  VertexId n = 0;
};

inline ReductionArtifacts build_augmented_laplacian(const SparseMatrix& a) {
  ReductionArtifacts out;
  out.parts = decompose(a);
  out.n = a.dimension();
  const VertexId n = out.n;
  std::vector<RawEdge> edges;
  for (const auto& e : out.parts.negative) {
    if (e.row >= e.col) continue;
    edges.push_back({e.row, e.col, -1.0 / e.value});
    edges.push_back({e.row + n, e.col + n, -1.0 / e.value});
  }
  for (const auto& e : out.parts.positive) {
    if (e.row >= e.col) continue;
    edges.push_back({e.row, e.col + n, 1.0 / e.value});
    edges.push_back({e.col, e.row + n, 1.0 / e.value});
  }
  for (VertexId i = 0; i < n; ++i) {
    const double c = out.parts.d2[static_cast<std::size_t>(i)] / 2.0;
    if (c > 0.0) edges.push_back({i, i + n, 1.0 / c});
  }
  out.augmented = build_graph(2 * n, edges);
  return out;
}

// Vertices of `g` labelled `label` as their own graph (ids in increasing
// order of the original ids).
struct Subgraph {
  WeightedGraph graph;
  std::vector<VertexId> vertices;  // local -> original
};

inline Subgraph induced_subgraph(const WeightedGraph& g, std::span<const VertexId> labels, VertexId label) {
  Subgraph s;
  std::vector<VertexId> local(static_cast<std::size_t>(g.num_vertices()), -1);
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    if (labels[static_cast<std::size_t>(v)] == label) {
      local[static_cast<std::size_t>(v)] = static_cast<VertexId>(s.vertices.size());
      s.vertices.push_back(v);
    }
  }
  std::vector<RawEdge> edges;
  for (const auto& e : g.edges()) {
    const auto a = local[static_cast<std::size_t>(e.tail)];
    const auto b = local[static_cast<std::size_t>(e.head)];
    if (a >= 0 && b >= 0) edges.push_back({a, b, e.resistance});
  }
  s.graph = build_graph(static_cast<VertexId>(s.vertices.size()), edges);
  return s;
}

struct SddSolution {
  std::vector<double> x;
  std::vector<SolveReport> components;  // one per component with >= 2 vertices
  std::int64_t iterations = 0;
};

// Solves A x = b through the augmented Laplacian: each connected component
// gets the matching slice of the demand (b, -b), and x = (y_top - y_bottom)/2.
inline SddSolution solve_sdd(const SparseMatrix& a, std::span<const double> b, const SolverOptions& o) {
  validate_options(o);
  detail::require_size(b.size(), static_cast<std::size_t>(a.dimension()), "right-hand side");
  validate_sdd(a);
  const auto red = build_augmented_laplacian(a);
  const VertexId n = red.n;
  std::vector<double> demand(2 * static_cast<std::size_t>(n));
  for (VertexId i = 0; i < n; ++i) {
    demand[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)];
    demand[static_cast<std::size_t>(i + n)] = -b[static_cast<std::size_t>(i)];
  }
  const auto comps = connected_components(red.augmented);
  std::vector<double> y(demand.size(), 0.0);
  SddSolution out;
  const double tol = detail::balance_tolerance(demand);
  for (VertexId c = 0; c < comps.count; ++c) {
    const auto sub = induced_subgraph(red.augmented, comps.label, c);
    std::vector<double> local(sub.vertices.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < local.size(); ++i) {
      local[i] = demand[static_cast<std::size_t>(sub.vertices[i])];
      sum += local[i];
    }
    if (std::abs(sum) > tol) {
      throw Error(ErrorCode::kInconsistentSystem,
                  "component " + std::to_string(c) + " has demand sum " + std::to_string(sum));
    }
    if (sub.vertices.size() < 2) continue;
    SolverOptions co = o;
    co.seed = o.seed + static_cast<std::uint64_t>(c);
    co.given_tree.clear();
    if (co.tree == TreeStrategy::kGiven) co.tree = TreeStrategy::kLowStretch;
    co.root = 0;
    auto report = solve(sub.graph, local, co);
    for (std::size_t i = 0; i < local.size(); ++i) y[static_cast<std::size_t>(sub.vertices[i])] = report.voltages[i];
    out.iterations += report.iterations;
    out.components.push_back(std::move(report));
  }
  out.x.resize(static_cast<std::size_t>(n));
  for (VertexId i = 0; i < n; ++i) {
    out.x[static_cast<std::size_t>(i)] = 0.5 * (y[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i + n)]);
  }
  return out;
}

inline SddSolution solve_sdd(const SddSystem& s, const SolverOptions& o) { return solve_sdd(s.a, s.b, o); }

// Laplacian of a graph as a sparse matrix (conductance weights).
inline SparseMatrix laplacian_matrix(const WeightedGraph& g) {
  std::vector<MatrixEntry> e;
  for (const auto& edge : g.edges()) {
    const double c = edge.conductance();
    e.push_back({edge.tail, edge.tail, c});
    e.push_back({edge.head, edge.head, c});
    e.push_back({edge.tail, edge.head, -c});
    e.push_back({edge.head, edge.tail, -c});
  }
  return SparseMatrix(g.num_vertices(), e);
}

}  // namespace sddflow
