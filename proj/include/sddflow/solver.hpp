#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sddflow/error.hpp"
#include "sddflow/graph.hpp"
#include "sddflow/path_sum_tree.hpp"
#include "sddflow/sampling.hpp"
#include "sddflow/spanning_tree.hpp"

namespace sddflow {

enum class SolverVariant { kSimple, kExample, kFull };

inline std::string_view to_string(SolverVariant v) {
  switch (v) {
    case SolverVariant::kSimple: return "simple";
    case SolverVariant::kExample: return "example";
    case SolverVariant::kFull: return "full";
  }
  return "unknown";
}

struct SolverOptions {
  double eps = 0.1;
  std::uint64_t seed = 1;
  SolverVariant variant = SolverVariant::kSimple;
  TreeStrategy tree = TreeStrategy::kLowStretch;
  std::vector<EdgeId> given_tree;  // used with TreeStrategy::kGiven
  VertexId root = 0;
  // Cap on the total number of cycle updates across all stages.
  std::optional<std::int64_t> max_iterations;
  // Demand balance / feasibility tolerance; default scales with |chi|.
  std::optional<double> feasibility_tolerance;
  // Stop a stage once the duality gap drops to eps * energy; checked every
  // `early_exit_interval` updates. Off by default.
  bool early_exit = false;
  std::int64_t early_exit_interval = 0;  // 0: every ceil(tau) updates
};

struct StageRecord {
  double scale = 1.0;  // factor tree resistances were divided by
  std::int64_t planned = 0;
  std::int64_t executed = 0;
};

struct SolveReport {
  FlowVector flow;
  VoltageVector voltages;
  double energy = 0.0;
  double dual_energy = 0.0;
  double gap = 0.0;
  double max_residual = 0.0;
  std::int64_t iterations = 0;
  std::int64_t effective_iterations = 0;
  std::uint64_t seed = 0;
  double total_stretch = 0.0;
  double tau = 0.0;
  double wall_time_seconds = 0.0;
  SolverVariant variant = SolverVariant::kSimple;
  std::vector<StageRecord> stages;
};

inline void validate_options(const SolverOptions& o) {
  if (!(o.eps > 0.0) || !std::isfinite(o.eps)) throw Error(ErrorCode::kBadOption, "eps must be finite and positive");
  if (o.max_iterations && *o.max_iterations < 0) throw Error(ErrorCode::kBadOption, "max_iterations is negative");
  if (o.early_exit_interval < 0) throw Error(ErrorCode::kBadOption, "early_exit_interval is negative");
}

namespace detail {

inline void require_balanced(std::span<const double> chi, double tol) {
  double sum = 0.0;
  for (double x : chi) sum += x;
  if (std::abs(sum) > tol) throw Error(ErrorCode::kDemandNotBalanced, "demand sums to " + std::to_string(sum));
}

inline double balance_tolerance(std::span<const double> chi) {
  return 1e-9 * (1.0 + max_abs(chi)) * std::max<double>(1.0, std::sqrt(static_cast<double>(chi.size())));
}

inline std::int64_t clamp_count(double k) {
  if (!(k > 0.0)) return 0;
  if (k >= 9.0e18) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(std::ceil(k));
}

// Natural log with its argument clamped below at 1.
inline double log1_clamped(double x) { return std::log(std::max(1.0, x)); }

}  // namespace detail

// The unique flow supported on the tree meeting chi: each tree edge carries
// the total demand of the side away from the root.
inline FlowVector initial_tree_flow(const WeightedGraph& g, const SpanningTree& t, std::span<const double> chi,
                                    std::optional<double> tol = std::nullopt) {
  detail::require_size(chi.size(), static_cast<std::size_t>(g.num_vertices()), "demand");
  detail::require_balanced(chi, tol.value_or(detail::balance_tolerance(chi)));
  std::vector<double> below(chi.begin(), chi.end());
  FlowVector f(static_cast<std::size_t>(g.num_edges()), 0.0);
  const auto order = t.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const VertexId v = *it;
    if (v == t.root()) continue;
    // `below[v]` leaves the subtree of v through its parent edge.
    f[static_cast<std::size_t>(t.parent_edge(v))] = -t.parent_sign(v) * below[static_cast<std::size_t>(v)];
    below[static_cast<std::size_t>(t.parent(v))] += below[static_cast<std::size_t>(v)];
  }
  return f;
}

// R_e = r_e everywhere except tree edges, which are divided by kappa.
inline WeightedGraph scale_tree(const WeightedGraph& g, const SpanningTree& t, double kappa) {
  if (!(kappa >= 1.0) || !std::isfinite(kappa)) throw Error(ErrorCode::kBadScale, "kappa = " + std::to_string(kappa));
  std::vector<double> r(static_cast<std::size_t>(g.num_edges()));
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    r[static_cast<std::size_t>(e)] = t.is_tree_edge(e) ? g.resistance(e) / kappa : g.resistance(e);
  }
  return g.with_resistances(r);
}

// Mutable state of a cycle-update run: tree-edge flows live in a path-sum
// structure, off-tree flows in one record per off-tree edge.
class SolverState {
 public:
  SolverState(WeightedGraph g, SpanningTree t, std::span<const double> chi, std::uint64_t seed,
              std::optional<double> tol = std::nullopt)
      : g_(std::move(g)), t_(std::move(t)), chi_(chi.begin(), chi.end()), rng_(seed) {
    tolerance_ = tol.value_or(detail::balance_tolerance(chi_));
    flow_scale_ = 1.0 + detail::max_abs(chi_);
    rebuild(FlowVector(static_cast<std::size_t>(g_.num_edges()), 0.0));
  }

  const WeightedGraph& graph() const { return g_; }
  const SpanningTree& tree() const { return t_; }
  const StretchSummary& stretch() const { return stretch_; }
  std::span<const double> demand() const { return chi_; }
  std::int64_t iterations() const { return iterations_; }
  std::int64_t effective_iterations() const { return effective_; }
  Rng& rng() { return rng_; }

  // Delta_e(f) = f(a,b) r_ab - (v(a) - v(b)).
  double cycle_potential(EdgeId e) const { return potential(cycles_[cycle_index(e)]); }

  // f <- f - (Delta_e / R_e) c_e. Returns Delta_e before the update.
  double cycle_update(EdgeId e) { return apply(cycle_index(e)); }

  EdgeId sample_edge() { return stretch_.off_tree[sample_index()]; }

  // `count` sampled updates, the same draws and results as repeating
  // cycle_update(sample_edge()). Memory for upcoming cycles is requested a
  // few updates early, one dependent level at a time.
  void run(std::int64_t count) {
    if (count <= 0) return;
    constexpr std::int64_t kWindow = 16;
    std::array<std::size_t, kWindow> ring{};
    const auto slot = [](std::int64_t j) { return static_cast<std::size_t>(j % kWindow); };
    const auto draw = [&](std::int64_t j) {
      const std::size_t i = sample_index();
      ring[slot(j)] = i;
      __builtin_prefetch(&cycles_[i], 1);
    };
    for (std::int64_t j = 0; j < std::min(count, kWindow); ++j) draw(j);
    for (std::int64_t i = 0; i < count; ++i) {
      if (const auto j = i + kWindow * 3 / 4; j < count) {
        const Cycle& c = cycles_[ring[slot(j)]];
        ds_.prefetch_offsets(c.tail);
        ds_.prefetch_offsets(c.head);
      }
      if (const auto j = i + kWindow / 2; j < count) {
        const Cycle& c = cycles_[ring[slot(j)]];
        ds_.prefetch_entries(c.tail);
        ds_.prefetch_entries(c.head);
      }
      if (const auto j = i + kWindow / 4; j < count) {
        const Cycle& c = cycles_[ring[slot(j)]];
        ds_.prefetch_state(c.tail);
        ds_.prefetch_state(c.head);
      }
      apply(ring[slot(i)]);
      if (i + kWindow < count) draw(i + kWindow);
    }
  }

  VoltageVector tree_induced_voltages() const {
    VoltageVector v(static_cast<std::size_t>(g_.num_vertices()));
    for (VertexId a = 0; a < g_.num_vertices(); ++a) v[static_cast<std::size_t>(a)] = ds_.query(a);
    return v;
  }

  FlowVector flow() const {
    FlowVector f = materialize_tree_flows(ds_, g_, t_);
    for (std::size_t i = 0; i < cycles_.size(); ++i) {
      f[static_cast<std::size_t>(stretch_.off_tree[i])] = cycles_[i].off_flow;
    }
    return f;
  }

  // By edge id, 0 on tree edges.
  FlowVector off_tree_flows() const {
    FlowVector f(static_cast<std::size_t>(g_.num_edges()), 0.0);
    for (std::size_t i = 0; i < cycles_.size(); ++i) {
      f[static_cast<std::size_t>(stretch_.off_tree[i])] = cycles_[i].off_flow;
    }
    return f;
  }

  // Switches to new resistances on the same graph (e.g. another tree
  // scaling). Off-tree flows carry over; tree flows are re-derived from the
  // demand so the represented flow stays feasible.
  void set_graph(WeightedGraph g) {
    if (g.num_vertices() != g_.num_vertices() || g.num_edges() != g_.num_edges()) {
      throw Error(ErrorCode::kDimensionMismatch, "replacement graph differs in shape");
    }
    auto off = off_tree_flows();
    g_ = std::move(g);
    rebuild(std::move(off));
  }

  // Overwrites the off-tree flows (graph orientation, indexed by edge id;
  // tree entries ignored) and re-derives the tree part.
  void set_off_tree_flows(std::span<const double> f) {
    detail::require_size(f.size(), static_cast<std::size_t>(g_.num_edges()), "flow");
    FlowVector off(static_cast<std::size_t>(g_.num_edges()), 0.0);
    for (EdgeId e : t_.off_tree()) off[static_cast<std::size_t>(e)] = f[static_cast<std::size_t>(e)];
    rebuild(std::move(off));
  }

  // Sum over off-tree edges of Delta_e^2 / r_e, the duality gap against
  // tree-induced voltages.
  double potential_gap() const {
    double s = 0.0;
    for (const Cycle& c : cycles_) {
      const double d = potential(c);
      s += d * d / c.resistance;
    }
    return s;
  }

 private:
  static constexpr double kEffectiveThreshold = 1e-12;

  // An off-tree edge with what an update on its cycle reads and writes.
  struct Cycle {
    VertexId tail;
    VertexId head;
    double resistance;        // r_e
    double cycle_resistance;  // R_e
    double off_flow;
  };

  std::size_t cycle_index(EdgeId e) const {
    if (e < 0 || e >= g_.num_edges() || cycle_of_[static_cast<std::size_t>(e)] < 0) {
      throw Error(ErrorCode::kNotOffTree, "edge " + std::to_string(e));
    }
    return static_cast<std::size_t>(cycle_of_[static_cast<std::size_t>(e)]);
  }

  std::size_t sample_index() {
    if (alias_.empty()) throw Error(ErrorCode::kNoOffTreeEdges, "tree spans every edge");
    return alias_.sample(rng_);
  }

  double potential(const Cycle& c) const {
    return c.off_flow * c.resistance - (ds_.query(c.tail) - ds_.query(c.head));
  }

  double apply(std::size_t i) {
    Cycle& c = cycles_[i];
    const double delta = potential(c);
    const double alpha = delta / c.cycle_resistance;
    c.off_flow -= alpha;
    // The tree part of c_e runs head -> tail; subtracting it pushes alpha
    // along the tree path tail -> head.
    ds_.update(c.head, alpha);
    ds_.update(c.tail, -alpha);
    ++iterations_;
    if (std::abs(alpha) > kEffectiveThreshold * flow_scale_) ++effective_;
    return delta;
  }

  void rebuild(FlowVector off) {
    stretch_ = compute_stretch(g_, t_);
    cycles_.clear();
    cycle_of_.assign(static_cast<std::size_t>(g_.num_edges()), -1);
    for (std::size_t i = 0; i < stretch_.off_tree.size(); ++i) {
      const EdgeId e = stretch_.off_tree[i];
      const auto& edge = g_.edge(e);
      cycles_.push_back({edge.tail, edge.head, edge.resistance, stretch_.cycle_resistance[i],
                         off[static_cast<std::size_t>(e)]});
      cycle_of_[static_cast<std::size_t>(e)] = static_cast<std::int32_t>(i);
    }
    alias_ = stretch_.off_tree.empty() ? AliasTable() : AliasTable(stretch_.probability);

    auto residual = chi_;
    const auto off_div = divergence(g_, off);
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= off_div[i];
    const auto tree_flow = initial_tree_flow(g_, t_, residual, tolerance_);
    ds_ = FlatPathSum(g_, t_);
    load_tree_flows(ds_, t_, tree_flow);
  }

  WeightedGraph g_;
  SpanningTree t_;
  std::vector<double> chi_;
  Rng rng_;
  double tolerance_ = 0.0;
  double flow_scale_ = 1.0;
  StretchSummary stretch_;
  LargeVector<Cycle> cycles_;           // order of stretch_.off_tree
  std::vector<std::int32_t> cycle_of_;  // by edge id, -1 on tree edges
  AliasTable alias_;
  FlatPathSum ds_;
  std::int64_t iterations_ = 0;
  std::int64_t effective_ = 0;
};

namespace detail {

class Budget {
 public:
  explicit Budget(std::optional<std::int64_t> cap) : left_(cap.value_or(std::numeric_limits<std::int64_t>::max())) {}
  std::int64_t take(std::int64_t want) {
    const auto got = std::min(want, left_);
    left_ -= got;
    return got;
  }

 private:
  std::int64_t left_;
};

inline std::int64_t run_updates(SolverState& s, std::int64_t k, const SolverOptions& o, const WeightedGraph& target) {
  if (k <= 0) return 0;
  std::int64_t interval = o.early_exit_interval;
  if (interval == 0) interval = std::max<std::int64_t>(1, clamp_count(s.stretch().tau));
  if (!o.early_exit) {
    s.run(k);
    return k;
  }
  for (std::int64_t done = 0; done < k;) {
    const auto step = std::min(k - done, interval);
    s.run(step);
    done += step;
    if (step < interval) break;
    const auto f = s.flow();
    const double en = energy(target, f);
    const double gap = en - dual_energy(target, s.tree_induced_voltages(), s.demand());
    if (gap <= o.eps * en) return done;
  }
  return k;
}

inline SolveReport finish(const SolverState& s, const WeightedGraph& g, const SolverOptions& o,
                          const StretchSummary& base, std::vector<StageRecord> stages,
                          std::chrono::steady_clock::time_point start) {
  SolveReport r;
  r.flow = s.flow();
  r.voltages = s.tree_induced_voltages();
  r.energy = energy(g, r.flow);
  r.dual_energy = dual_energy(g, r.voltages, s.demand());
  r.gap = r.energy - r.dual_energy;
  r.max_residual = check_feasible(g, r.flow, s.demand(), std::numeric_limits<double>::infinity()).max_residual;
  r.iterations = s.iterations();
  r.effective_iterations = s.effective_iterations();
  r.seed = o.seed;
  r.total_stretch = base.total_stretch;
  r.tau = base.tau;
  r.variant = o.variant;
  r.stages = std::move(stages);
  r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline double log_kappa(VertexId n) { return std::max(1.0, std::log(static_cast<double>(n))); }

}  // namespace detail

// Sampled cycle updates on the tree's cycles: K = ceil(tau ln(st(T) tau / eps)).
inline SolveReport simple_solver(const WeightedGraph& g, const SpanningTree& t, std::span<const double> chi,
                                 const SolverOptions& o) {
  validate_options(o);
  const auto start = std::chrono::steady_clock::now();
  SolverState s(g, t, chi, o.seed, o.feasibility_tolerance);
  const auto base = s.stretch();
  std::vector<StageRecord> stages;
  if (!base.off_tree.empty()) {
    detail::Budget budget(o.max_iterations);
    const auto k = detail::clamp_count(base.tau * detail::log1_clamped(base.total_stretch * base.tau / o.eps));
    const auto done = detail::run_updates(s, budget.take(k), o, g);
    stages.push_back({1.0, k, done});
  }
  return detail::finish(s, g, o, base, std::move(stages), start);
}

// Warm start on the tree scaled by ln n with a constant target, then
// ceil(tau ln(2 ln n / eps)) updates plus a uniform random extra count below
// ceil(tau).
inline SolveReport example_solver(const WeightedGraph& g, const SpanningTree& t, std::span<const double> chi,
                                  const SolverOptions& o) {
  validate_options(o);
  const auto start = std::chrono::steady_clock::now();
  const double kappa = detail::log_kappa(g.num_vertices());
  SolverState s(scale_tree(g, t, kappa), t, chi, o.seed, o.feasibility_tolerance);
  const auto base = compute_stretch(g, t);
  std::vector<StageRecord> stages;
  if (!base.off_tree.empty()) {
    detail::Budget budget(o.max_iterations);
    const auto& warm = s.stretch();
    const auto k1 = detail::clamp_count(warm.tau * detail::log1_clamped(warm.total_stretch * warm.tau / 1.0));
    SolverOptions warm_options = o;
    warm_options.eps = 1.0;
    const auto done1 = detail::run_updates(s, budget.take(k1), warm_options, s.graph());
    stages.push_back({kappa, k1, done1});

    s.set_graph(g);
    const auto extra = static_cast<std::int64_t>(s.rng().below(static_cast<std::uint64_t>(detail::clamp_count(base.tau))));
    const auto k2 = detail::clamp_count(base.tau * detail::log1_clamped(2.0 * kappa / o.eps)) + extra;
    const auto done2 = detail::run_updates(s, budget.take(k2), o, g);
    stages.push_back({1.0, k2, done2});
  } else {
    s.set_graph(g);
  }
  return detail::finish(s, g, o, base, std::move(stages), start);
}

// kappa_1 = ln n, kappa_{i+1} = ln kappa_i until kappa_c <= 2 (each >= 1).
inline std::vector<double> kappa_sequence(VertexId n) {
  std::vector<double> k{detail::log_kappa(n)};
  while (k.back() > 2.0) k.push_back(std::max(1.0, std::log(k.back())));
  return k;
}

// Stage i runs on the tree scaled by kappa_i ... kappa_c; the last stage is
// the original graph with a random extra count as in example_solver.
inline SolveReport full_solver(const WeightedGraph& g, const SpanningTree& t, std::span<const double> chi,
                               const SolverOptions& o) {
  validate_options(o);
  const auto start = std::chrono::steady_clock::now();
  const auto kappa = kappa_sequence(g.num_vertices());
  const std::size_t c = kappa.size();
  std::vector<double> scale(c + 1, 1.0);  // scale[i] = prod_{j >= i} kappa_j, 0-based
  for (std::size_t i = c; i-- > 0;) scale[i] = scale[i + 1] * kappa[i];

  SolverState s(scale_tree(g, t, scale[0]), t, chi, o.seed, o.feasibility_tolerance);
  const auto base = compute_stretch(g, t);
  std::vector<StageRecord> stages;
  if (!base.off_tree.empty()) {
    detail::Budget budget(o.max_iterations);
    const double m = static_cast<double>(g.num_edges());
    for (std::size_t i = 0; i <= c; ++i) {
      if (i > 0) s.set_graph(i < c ? scale_tree(g, t, scale[i]) : g);
      std::int64_t k = 0;
      if (i == 0) {
        k = detail::clamp_count((base.tau / scale[0] + m) * detail::log1_clamped(s.stretch().total_stretch));
      } else if (i < c) {
        k = detail::clamp_count((base.tau / scale[i] + m) * detail::log1_clamped(2.0 * kappa[i - 1] - 1.0));
      } else {
        const auto extra =
            static_cast<std::int64_t>(s.rng().below(static_cast<std::uint64_t>(detail::clamp_count(base.tau))));
        k = detail::clamp_count((base.tau + m) * detail::log1_clamped((2.0 * kappa[c - 1] - 1.0) / o.eps)) + extra;
      }
      SolverOptions stage_options = o;
      if (i < c) stage_options.eps = 1.0;
      const auto done = detail::run_updates(s, budget.take(k), stage_options, s.graph());
      stages.push_back({scale[i], k, done});
    }
  } else {
    s.set_graph(g);
  }
  return detail::finish(s, g, o, base, std::move(stages), start);
}

inline SolveReport solve(const WeightedGraph& g, const SpanningTree& t, std::span<const double> chi,
                         const SolverOptions& o) {
  switch (o.variant) {
    case SolverVariant::kSimple: return simple_solver(g, t, chi, o);
    case SolverVariant::kExample: return example_solver(g, t, chi, o);
    case SolverVariant::kFull: return full_solver(g, t, chi, o);
  }
  throw Error(ErrorCode::kBadOption, "unknown solver variant");
}

// Builds the tree named by the options, then solves.
inline SolveReport solve(const WeightedGraph& g, std::span<const double> chi, const SolverOptions& o) {
  validate_options(o);
  detail::require_size(chi.size(), static_cast<std::size_t>(g.num_vertices()), "demand");
  const auto t = build_tree(g, o.tree, o.seed, o.root, o.given_tree);
  return solve(g, t, chi, o);
}

inline SolveReport simple_solver(const WeightedGraph& g, std::span<const double> chi, SolverOptions o) {
  o.variant = SolverVariant::kSimple;
  return solve(g, chi, o);
}

inline SolveReport example_solver(const WeightedGraph& g, std::span<const double> chi, SolverOptions o) {
  o.variant = SolverVariant::kExample;
  return solve(g, chi, o);
}

inline SolveReport full_solver(const WeightedGraph& g, std::span<const double> chi, SolverOptions o) {
  o.variant = SolverVariant::kFull;
  return solve(g, chi, o);
}

}  // namespace sddflow
