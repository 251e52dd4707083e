#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "sddflow/error.hpp"
#include "sddflow/graph.hpp"
#include "sddflow/sampling.hpp"

namespace sddflow {

enum class TreeStrategy { kLowStretch, kMinResistance, kGiven };

struct SignedEdge {
  EdgeId edge;
  int sign;  // +1 when walked tail -> head
  bool operator==(const SignedEdge&) const = default;
};

// A spanning tree of a connected graph, rooted and oriented away from the
// root. Path resistances are those of the graph the tree was built from.
class SpanningTree {
 public:
  SpanningTree() = default;

  // Validates that `tree_edges` are n-1 distinct edges spanning `g`.
  static SpanningTree from_edges(const WeightedGraph& g, std::span<const EdgeId> tree_edges, VertexId root = 0) {
    const VertexId n = g.num_vertices();
    if (n == 0) throw Error(ErrorCode::kInvalidTreeEdges, "empty graph");
    if (root < 0 || root >= n) throw Error(ErrorCode::kVertexOutOfRange, "root " + std::to_string(root));
    if (tree_edges.size() != static_cast<std::size_t>(n - 1)) {
      throw Error(ErrorCode::kInvalidTreeEdges, "expected " + std::to_string(n - 1) + " tree edges, got " +
                                                    std::to_string(tree_edges.size()));
    }
    SpanningTree t;
    t.root_ = root;
    t.in_tree_.assign(static_cast<std::size_t>(g.num_edges()), 0);
    for (EdgeId e : tree_edges) {
      if (e < 0 || e >= g.num_edges()) throw Error(ErrorCode::kInvalidTreeEdges, "edge id " + std::to_string(e));
      if (t.in_tree_[static_cast<std::size_t>(e)]) {
        throw Error(ErrorCode::kInvalidTreeEdges, "duplicate edge id " + std::to_string(e));
      }
      t.in_tree_[static_cast<std::size_t>(e)] = 1;
    }

    const auto un = static_cast<std::size_t>(n);
    t.parent_.assign(un, -1);
    t.parent_edge_.assign(un, -1);
    t.parent_sign_.assign(un, 0);
    t.depth_resistance_.assign(un, 0.0);
    t.hops_.assign(un, 0);
    t.order_.reserve(un);
    t.parent_[static_cast<std::size_t>(root)] = root;
    t.order_.push_back(root);
    for (std::size_t head = 0; head < t.order_.size(); ++head) {
      const VertexId u = t.order_[head];
      for (const auto& inc : g.incident(u)) {
        if (!t.in_tree_[static_cast<std::size_t>(inc.edge)]) continue;
        const auto v = static_cast<std::size_t>(inc.neighbor);
        if (t.parent_[v] >= 0) continue;
        t.parent_[v] = u;
        t.parent_edge_[v] = inc.edge;
        t.parent_sign_[v] = static_cast<std::int8_t>(g.edge(inc.edge).tail == u ? 1 : -1);
        t.depth_resistance_[v] = t.depth_resistance_[static_cast<std::size_t>(u)] + g.resistance(inc.edge);
        t.hops_[v] = t.hops_[static_cast<std::size_t>(u)] + 1;
        t.order_.push_back(inc.neighbor);
      }
    }
    if (t.order_.size() != un) {
      throw Error(ErrorCode::kInvalidTreeEdges, "tree edges do not span the graph");
    }
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
      if (!t.in_tree_[static_cast<std::size_t>(e)]) t.off_tree_.push_back(e);
    }
    t.build_lca();
    return t;
  }

  VertexId root() const { return root_; }
  VertexId num_vertices() const { return static_cast<VertexId>(parent_.size()); }

  // Root maps to itself.
  VertexId parent(VertexId v) const { return parent_[static_cast<std::size_t>(v)]; }
  // Edge to the parent, -1 at the root.
  EdgeId parent_edge(VertexId v) const { return parent_edge_[static_cast<std::size_t>(v)]; }
  // +1 when the graph orients the parent edge parent -> v.
  int parent_sign(VertexId v) const { return parent_sign_[static_cast<std::size_t>(v)]; }
  double depth_resistance(VertexId v) const { return depth_resistance_[static_cast<std::size_t>(v)]; }
  std::int32_t hops(VertexId v) const { return hops_[static_cast<std::size_t>(v)]; }

  // Every vertex once, parents before children.
  std::span<const VertexId> order() const { return order_; }
  bool is_tree_edge(EdgeId e) const { return in_tree_[static_cast<std::size_t>(e)] != 0; }
  std::span<const EdgeId> off_tree() const { return off_tree_; }

  std::vector<EdgeId> tree_edges() const {
    std::vector<EdgeId> out;
    out.reserve(order_.size());
    for (VertexId v : order_) {
      if (v != root_) out.push_back(parent_edge(v));
    }
    return out;
  }

  VertexId lca(VertexId a, VertexId b) const {
    if (hops(a) < hops(b)) std::swap(a, b);
    const auto n = parent_.size();
    auto diff = static_cast<std::uint32_t>(hops(a) - hops(b));
    for (std::size_t k = 0; diff != 0; ++k, diff >>= 1) {
      if (diff & 1u) a = up_[k * n + static_cast<std::size_t>(a)];
    }
    if (a == b) return a;
    for (std::size_t k = levels_; k-- > 0;) {
      const VertexId pa = up_[k * n + static_cast<std::size_t>(a)];
      const VertexId pb = up_[k * n + static_cast<std::size_t>(b)];
      if (pa != pb) {
        a = pa;
        b = pb;
      }
    }
    return parent(a);
  }

  double path_resistance(VertexId a, VertexId b) const {
    return depth_resistance(a) + depth_resistance(b) - 2.0 * depth_resistance(lca(a, b));
  }

  // Edges of the unique tree path a -> b, signed by walking direction.
  std::vector<SignedEdge> tree_path(VertexId a, VertexId b) const {
    const VertexId meet = lca(a, b);
    std::vector<SignedEdge> up_part;
    for (VertexId v = a; v != meet; v = parent(v)) up_part.push_back({parent_edge(v), -parent_sign(v)});
    std::vector<SignedEdge> down_part;
    for (VertexId v = b; v != meet; v = parent(v)) down_part.push_back({parent_edge(v), parent_sign(v)});
    up_part.insert(up_part.end(), down_part.rbegin(), down_part.rend());
    return up_part;
  }

 private:
  void build_lca() {
    const auto n = parent_.size();
    std::int32_t max_hops = 0;
    for (auto h : hops_) max_hops = std::max(max_hops, h);
    levels_ = std::max<std::size_t>(1, std::bit_width(static_cast<std::uint32_t>(max_hops)));
    up_.resize(levels_ * n);
    std::copy(parent_.begin(), parent_.end(), up_.begin());
    for (std::size_t k = 1; k < levels_; ++k) {
      for (std::size_t v = 0; v < n; ++v) {
        up_[k * n + v] = up_[(k - 1) * n + static_cast<std::size_t>(up_[(k - 1) * n + v])];
      }
    }
  }

  VertexId root_ = 0;
  std::vector<VertexId> parent_;
  std::vector<EdgeId> parent_edge_;
  std::vector<std::int8_t> parent_sign_;
  std::vector<double> depth_resistance_;
  std::vector<std::int32_t> hops_;
  std::vector<VertexId> order_;
  std::vector<char> in_tree_;
  std::vector<EdgeId> off_tree_;
  std::size_t levels_ = 1;
  std::vector<VertexId> up_;
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

inline void require_connected(const WeightedGraph& g) {
  if (g.num_vertices() == 0) throw Error(ErrorCode::kGraphDisconnected, "graph has no vertices");
  const auto comps = connected_components(g);
  if (comps.count != 1) {
    throw Error(ErrorCode::kGraphDisconnected, "graph has " + std::to_string(comps.count) + " components");
  }
}

// Kruskal over the edges not yet joined by `sets`, lightest resistance first.
inline void kruskal_complete(const WeightedGraph& g, DisjointSets& sets, std::vector<EdgeId>& tree) {
  std::vector<EdgeId> ids(static_cast<std::size_t>(g.num_edges()));
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](EdgeId x, EdgeId y) { return g.resistance(x) < g.resistance(y); });
  for (EdgeId e : ids) {
    if (sets.unite(static_cast<std::size_t>(g.edge(e).tail), static_cast<std::size_t>(g.edge(e).head))) {
      tree.push_back(e);
    }
  }
}

}  // namespace detail

inline std::vector<EdgeId> min_resistance_tree_edges(const WeightedGraph& g) {
  detail::require_connected(g);
  detail::DisjointSets sets(static_cast<std::size_t>(g.num_vertices()));
  std::vector<EdgeId> tree;
  detail::kruskal_complete(g, sets, tree);
  return tree;
}

// AKPW-flavoured ball growing. Each round contracts the current clusters,
// keeps inter-cluster edges with resistance <= radius, and grows balls from
// every cluster with exponentially distributed head starts (multi-source
// Dijkstra); the shortest-path forest edges join the tree. The radius doubles
// every round. No stretch bound is claimed.
inline std::vector<EdgeId> low_stretch_tree_edges(const WeightedGraph& g, std::uint64_t seed) {
  detail::require_connected(g);
  const VertexId n = g.num_vertices();
  const auto un = static_cast<std::size_t>(n);
  std::vector<EdgeId> tree;
  if (n <= 1) return tree;
  tree.reserve(un - 1);

  double rmin = std::numeric_limits<double>::infinity();
  for (const auto& e : g.edges()) rmin = std::min(rmin, e.resistance);

  Rng rng(seed);
  detail::DisjointSets sets(un);
  std::size_t clusters = un;
  double radius = 2.0 * rmin;
  std::vector<std::int32_t> cluster_of(un);
  std::vector<std::int32_t> compact(un);

  constexpr int kMaxRounds = 128;
  for (int round = 0; round < kMaxRounds && clusters > 1; ++round, radius *= 2.0) {
    std::fill(compact.begin(), compact.end(), -1);
    std::int32_t k = 0;
    for (std::size_t v = 0; v < un; ++v) {
      const auto rep = sets.find(v);
      if (compact[rep] < 0) compact[rep] = k++;
      cluster_of[v] = compact[rep];
    }
    const auto uk = static_cast<std::size_t>(k);

    // Contracted adjacency restricted to short inter-cluster edges.
    std::vector<std::size_t> offsets(uk + 1, 0);
    for (const auto& e : g.edges()) {
      const auto ca = cluster_of[static_cast<std::size_t>(e.tail)];
      const auto cb = cluster_of[static_cast<std::size_t>(e.head)];
      if (ca == cb || e.resistance > radius) continue;
      ++offsets[static_cast<std::size_t>(ca) + 1];
      ++offsets[static_cast<std::size_t>(cb) + 1];
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    if (offsets[uk] == 0) continue;
    std::vector<Incidence> arcs(offsets[uk]);
    {
      std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
      for (EdgeId id = 0; id < g.num_edges(); ++id) {
        const auto& e = g.edge(id);
        const auto ca = cluster_of[static_cast<std::size_t>(e.tail)];
        const auto cb = cluster_of[static_cast<std::size_t>(e.head)];
        if (ca == cb || e.resistance > radius) continue;
        arcs[cursor[static_cast<std::size_t>(ca)]++] = {cb, id};
        arcs[cursor[static_cast<std::size_t>(cb)]++] = {ca, id};
      }
    }

    const double rate = std::max(1.0, std::log(static_cast<double>(k))) / radius;
    std::vector<double> dist(uk);
    double max_shift = 0.0;
    for (std::size_t c = 0; c < uk; ++c) {
      dist[c] = -rng.exponential(rate);
      max_shift = std::max(max_shift, -dist[c]);
    }
    for (auto& d : dist) d += max_shift;

    std::vector<EdgeId> pred(uk, -1);
    std::vector<char> settled(uk, 0);
    using Item = std::pair<double, std::int32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (std::size_t c = 0; c < uk; ++c) heap.emplace(dist[c], static_cast<std::int32_t>(c));
    while (!heap.empty()) {
      const auto [d, c] = heap.top();
      heap.pop();
      const auto uc = static_cast<std::size_t>(c);
      if (settled[uc] || d > dist[uc]) continue;
      settled[uc] = 1;
      for (std::size_t i = offsets[uc]; i < offsets[uc + 1]; ++i) {
        const auto nb = static_cast<std::size_t>(arcs[i].neighbor);
        if (settled[nb]) continue;
        const double nd = d + g.resistance(arcs[i].edge);
        if (nd < dist[nb]) {
          dist[nb] = nd;
          pred[nb] = arcs[i].edge;
          heap.emplace(nd, arcs[i].neighbor);
        }
      }
    }
    for (std::size_t c = 0; c < uk; ++c) {
      if (pred[c] < 0) continue;
      const auto& e = g.edge(pred[c]);
      if (sets.unite(static_cast<std::size_t>(e.tail), static_cast<std::size_t>(e.head))) {
        tree.push_back(pred[c]);
        --clusters;
      }
    }
  }
  if (clusters > 1) detail::kruskal_complete(g, sets, tree);
  return tree;
}

inline SpanningTree build_tree(const WeightedGraph& g, TreeStrategy strategy, std::uint64_t seed = 0,
                               VertexId root = 0, std::span<const EdgeId> given = {}) {
  switch (strategy) {
    case TreeStrategy::kLowStretch:
      return SpanningTree::from_edges(g, low_stretch_tree_edges(g, seed), root);
    case TreeStrategy::kMinResistance:
      return SpanningTree::from_edges(g, min_resistance_tree_edges(g), root);
    case TreeStrategy::kGiven:
      detail::require_connected(g);
      return SpanningTree::from_edges(g, given, root);
  }
  throw Error(ErrorCode::kBadOption, "unknown tree strategy");
}

// Per off-tree edge quantities, indexed by position in `off_tree`.
struct StretchSummary {
  std::vector<EdgeId> off_tree;
  std::vector<double> stretch;           // st_e = tree path resistance / r_e
  std::vector<double> cycle_resistance;  // R_e = r_e (1 + st_e)
  std::vector<double> probability;       // p_e = R_e / (r_e tau)
  double total_stretch = 0.0;            // over all edges; tree edges count 1
  double tau = 0.0;                      // sum over off-tree edges of R_e / r_e
};

// Uses the resistances of `g`, which may differ from those `t` was built with
// (same topology), e.g. after tree scaling.
inline StretchSummary compute_stretch(const WeightedGraph& g, const SpanningTree& t) {
  const auto un = static_cast<std::size_t>(g.num_vertices());
  std::vector<double> depth(un, 0.0);
  for (VertexId v : t.order()) {
    if (v == t.root()) continue;
    depth[static_cast<std::size_t>(v)] = depth[static_cast<std::size_t>(t.parent(v))] + g.resistance(t.parent_edge(v));
  }
  StretchSummary s;
  const auto off = t.off_tree();
  s.off_tree.assign(off.begin(), off.end());
  s.stretch.resize(off.size());
  s.cycle_resistance.resize(off.size());
  s.probability.resize(off.size());
  double off_stretch = 0.0;
  for (std::size_t i = 0; i < off.size(); ++i) {
    const auto& e = g.edge(off[i]);
    const VertexId meet = t.lca(e.tail, e.head);
    const double path = depth[static_cast<std::size_t>(e.tail)] + depth[static_cast<std::size_t>(e.head)] -
                        2.0 * depth[static_cast<std::size_t>(meet)];
    s.stretch[i] = path / e.resistance;
    s.cycle_resistance[i] = e.resistance + path;
    off_stretch += s.stretch[i];
    s.tau += s.cycle_resistance[i] / e.resistance;
  }
  s.total_stretch = off_stretch + static_cast<double>(g.num_vertices() - 1);
  for (std::size_t i = 0; i < off.size(); ++i) {
    s.probability[i] = s.cycle_resistance[i] / (g.resistance(off[i]) * s.tau);
  }
  return s;
}

}  // namespace sddflow
