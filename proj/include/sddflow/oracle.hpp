#pragma once

// Dense reference computations for desk-scale inputs. Requires Eigen.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sddflow/error.hpp"
#include "sddflow/graph.hpp"
#include "sddflow/sdd.hpp"
#include "sddflow/spanning_tree.hpp"

namespace sddflow {

inline constexpr VertexId kDefaultOracleCap = 2000;

struct OracleResult {
  FlowVector flow;         // R^-1 B L+ chi
  VoltageVector voltages;  // L+ chi
  double energy = 0.0;
  double dual_energy = 0.0;
  double lambda_min = 0.0;  // smallest eigenvalue treated as nonzero
  double lambda_max = 0.0;
  int null_dimension = 0;
};

namespace detail {

inline Eigen::MatrixXd dense_laplacian(const WeightedGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_vertices());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) {
    const double c = e.conductance();
    l(e.tail, e.tail) += c;
    l(e.head, e.head) += c;
    l(e.tail, e.head) -= c;
    l(e.head, e.tail) -= c;
  }
  return l;
}

inline Eigen::MatrixXd dense_matrix(const SparseMatrix& a) {
  const auto n = static_cast<Eigen::Index>(a.dimension());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : a.entries()) m(e.row, e.col) = e.value;
  return m;
}

struct Pseudoinverse {
  Eigen::MatrixXd matrix;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  int null_dimension = 0;
};

// Symmetric positive semidefinite pseudoinverse by eigendecomposition;
// eigenvalues below 1e-10 * lambda_max are treated as zero.
inline Pseudoinverse pseudoinverse(const Eigen::MatrixXd& m) {
  Pseudoinverse out;
  const auto n = m.rows();
  if (n == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const auto& lambda = es.eigenvalues();
  out.lambda_max = lambda.cwiseAbs().maxCoeff();
  const double cut = 1e-10 * std::max(out.lambda_max, 1e-300);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(n);
  out.lambda_min = out.lambda_max;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(lambda(i)) > cut) {
      inv(i) = 1.0 / lambda(i);
      out.lambda_min = std::min(out.lambda_min, std::abs(lambda(i)));
    } else {
      ++out.null_dimension;
    }
  }
  out.matrix = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  return out;
}

inline Eigen::VectorXd to_eigen(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

inline std::vector<double> from_eigen(const Eigen::VectorXd& x) { return {x.data(), x.data() + x.size()}; }

inline void require_cap(VertexId n, VertexId cap) {
  if (n > cap) throw Error(ErrorCode::kTooLarge, std::to_string(n) + " exceeds dense limit " + std::to_string(cap));
}

}  // namespace detail

inline OracleResult dense_oracle(const WeightedGraph& g, std::span<const double> chi, VertexId cap = kDefaultOracleCap) {
  detail::require_cap(g.num_vertices(), cap);
  detail::require_size(chi.size(), static_cast<std::size_t>(g.num_vertices()), "demand");
  const auto pinv = detail::pseudoinverse(detail::dense_laplacian(g));
  OracleResult r;
  r.voltages = g.num_vertices() == 0 ? VoltageVector{} : detail::from_eigen(pinv.matrix * detail::to_eigen(chi));
  r.flow = induced_flow(g, r.voltages);
  r.energy = energy(g, r.flow);
  r.dual_energy = dual_energy(g, r.voltages, chi);
  r.lambda_min = pinv.lambda_min;
  r.lambda_max = pinv.lambda_max;
  r.null_dimension = pinv.null_dimension;
  if (std::abs(r.energy - r.dual_energy) > 1e-8 * std::max(1.0, std::abs(r.energy))) {
    throw Error(ErrorCode::kInfeasibleFlow, "oracle duality check failed; demand may be unbalanced on a component");
  }
  return r;
}

// sqrt(x^T L x).
inline double laplacian_norm(const WeightedGraph& g, std::span<const double> x) {
  return std::sqrt(std::max(0.0, laplacian_quadratic_form(g, x)));
}

inline double laplacian_norm_error(const WeightedGraph& g, std::span<const double> x, std::span<const double> ref) {
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - ref[i];
  return laplacian_norm(g, d);
}

// A+ b for a symmetric positive semidefinite matrix.
inline std::vector<double> dense_solve(const SparseMatrix& a, std::span<const double> b, VertexId cap = kDefaultOracleCap) {
  detail::require_cap(a.dimension(), cap);
  detail::require_size(b.size(), static_cast<std::size_t>(a.dimension()), "right-hand side");
  if (a.dimension() == 0) return {};
  const auto pinv = detail::pseudoinverse(detail::dense_matrix(a));
  return detail::from_eigen(pinv.matrix * detail::to_eigen(b));
}

inline double matrix_norm(const SparseMatrix& a, std::span<const double> x) {
  const auto ax = a.multiply(x);
  double s = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) s += x[i] * ax[i];
  return std::sqrt(std::max(0.0, s));
}

inline double matrix_norm_error(const SparseMatrix& a, std::span<const double> x, std::span<const double> ref) {
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - ref[i];
  return matrix_norm(a, d);
}

// Orthogonal projections on R^E in the R^{1/2}-scaled coordinates:
// onto_potential = R^-1/2 B L+ B^T R^-1/2 (electrical flows), and for each
// off-tree edge the projection removing that tree cycle's direction.
struct ProjectionMatrices {
  Eigen::MatrixXd onto_potential;
  std::vector<EdgeId> off_tree;
  std::vector<Eigen::MatrixXd> cycle_removal;
};

inline ProjectionMatrices build_projection_matrices(const WeightedGraph& g, const SpanningTree& t, VertexId cap = 50) {
  detail::require_cap(g.num_vertices(), cap);
  const auto m = static_cast<Eigen::Index>(g.num_edges());
  const auto n = static_cast<Eigen::Index>(g.num_vertices());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd sqrt_r(m);
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    b(e, g.edge(e).tail) = 1.0;
    b(e, g.edge(e).head) = -1.0;
    sqrt_r(e) = std::sqrt(g.resistance(e));
  }
  const Eigen::MatrixXd scaled = sqrt_r.cwiseInverse().asDiagonal() * b;
  const auto pinv = detail::pseudoinverse(detail::dense_laplacian(g));
  ProjectionMatrices out;
  out.onto_potential = scaled * pinv.matrix * scaled.transpose();
  for (EdgeId e : t.off_tree()) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
    c(e) = 1.0;
    const auto& edge = g.edge(e);
    for (const auto& step : t.tree_path(edge.head, edge.tail)) c(step.edge) += step.sign;
    const Eigen::VectorXd w = sqrt_r.asDiagonal() * c;
    out.off_tree.push_back(e);
    out.cycle_removal.push_back(Eigen::MatrixXd::Identity(m, m) - w * w.transpose() / w.squaredNorm());
  }
  return out;
}

// Dense cycle vector c_e (graph orientation) of an off-tree edge.
inline std::vector<double> tree_cycle(const WeightedGraph& g, const SpanningTree& t, EdgeId e) {
  std::vector<double> c(static_cast<std::size_t>(g.num_edges()), 0.0);
  c[static_cast<std::size_t>(e)] = 1.0;
  const auto& edge = g.edge(e);
  for (const auto& step : t.tree_path(edge.head, edge.tail)) c[static_cast<std::size_t>(step.edge)] += step.sign;
  return c;
}

}  // namespace sddflow
