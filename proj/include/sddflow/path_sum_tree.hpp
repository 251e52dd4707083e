#pragma once

#include <algorithm>
#include <cassert>
#include <concepts>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <vector>

#include "sddflow/error.hpp"
#include "sddflow/graph.hpp"
#include "sddflow/memory.hpp"
#include "sddflow/spanning_tree.hpp"

namespace sddflow {

// Root-path sum structures share one sign convention:
//   update(a, alpha): add alpha to the flow on every edge of the root -> a
//                     path, oriented away from the root;
//   query(a):         return v(a), the sum of f(e) r_e along the a -> root
//                     path, i.e. the tree-induced voltage with v(root) = 0.
template <typename T>
concept PathSumStructure = requires(T& ds, const T& cds, VertexId a, double alpha) {
  { cds.query(a) } -> std::convertible_to<double>;
  { ds.update(a, alpha) };
};

// How a vertex relates to the separator split of one decomposition node.
enum class MemberRole : std::uint8_t {
  kUpper,      // in T0 (the part holding the node root), other than the separator
  kSeparator,  // the separator itself
  kLower,      // in a part hanging below the separator
};

struct Membership {
  std::int32_t node;
  MemberRole role;
  // Resistance shared by root -> vertex and root -> separator paths.
  double height;
};

// One level of the separator split of a tree piece.
struct PieceSplit {
  VertexId separator = -1;
  // parts[0] is T0 (rooted at the piece root, separator as a leaf) when
  // `has_upper` holds; every other part is rooted at the separator. Each part
  // lists its vertices parents-first.
  std::vector<std::vector<VertexId>> parts;
  bool has_upper = false;
  // Indexed like the input piece.
  std::vector<double> height;
  std::vector<MemberRole> role;
};

namespace detail {

struct SplitWorkspace {
  explicit SplitWorkspace(std::size_t n)
      : position(n, -1), subtree(n), heavy(n), on_path(n), part(n) {}
  std::vector<std::int32_t> position;  // vertex -> index in the current piece
  std::vector<std::int32_t> subtree;
  std::vector<std::int32_t> heavy;
  std::vector<char> on_path;
  std::vector<std::int32_t> part;
};

inline std::vector<double> parent_resistances(const WeightedGraph& g, const SpanningTree& t) {
  std::vector<double> r(static_cast<std::size_t>(t.num_vertices()), 0.0);
  for (VertexId v : t.order()) {
    if (v != t.root()) r[static_cast<std::size_t>(v)] = g.resistance(t.parent_edge(v));
  }
  return r;
}

// `piece` lists a connected set of tree vertices parents-first; piece[0] is
// its root and every other vertex's tree parent lies in the piece.
inline PieceSplit split_piece(const SpanningTree& t, std::span<const double> parent_r,
                              std::span<const VertexId> piece, SplitWorkspace& ws) {
  const auto m = static_cast<std::int32_t>(piece.size());
  if (m < 2) throw Error(ErrorCode::kTooSmall, "tree piece needs at least 2 vertices");
  PieceSplit out;
  out.height.assign(piece.size(), 0.0);
  out.role.assign(piece.size(), MemberRole::kLower);
  auto pos_of = [&](VertexId v) { return ws.position[static_cast<std::size_t>(v)]; };

  for (std::int32_t i = 0; i < m; ++i) ws.position[static_cast<std::size_t>(piece[static_cast<std::size_t>(i)])] = i;

  if (m == 2) {
    // Two vertices: the separator is the non-root end, nothing to recurse on.
    out.separator = piece[1];
    out.role[1] = MemberRole::kSeparator;
    out.height[1] = parent_r[static_cast<std::size_t>(piece[1])];
    return out;
  }

  for (std::int32_t i = 0; i < m; ++i) {
    ws.subtree[static_cast<std::size_t>(i)] = 1;
    ws.heavy[static_cast<std::size_t>(i)] = -1;
    ws.on_path[static_cast<std::size_t>(i)] = 0;
  }
  for (std::int32_t i = m - 1; i > 0; --i) {
    const auto p = static_cast<std::size_t>(pos_of(t.parent(piece[static_cast<std::size_t>(i)])));
    ws.subtree[p] += ws.subtree[static_cast<std::size_t>(i)];
    const auto h = ws.heavy[p];
    if (h < 0 || ws.subtree[static_cast<std::size_t>(i)] > ws.subtree[static_cast<std::size_t>(h)] ||
        (ws.subtree[static_cast<std::size_t>(i)] == ws.subtree[static_cast<std::size_t>(h)] && i < h)) {
      ws.heavy[p] = i;
    }
  }

  // Walk into the largest child until no child subtree exceeds m / 2.
  std::int32_t d = 0;
  while (ws.heavy[static_cast<std::size_t>(d)] >= 0 &&
         2 * ws.subtree[static_cast<std::size_t>(ws.heavy[static_cast<std::size_t>(d)])] > m) {
    d = ws.heavy[static_cast<std::size_t>(d)];
  }
  out.separator = piece[static_cast<std::size_t>(d)];
  out.has_upper = d != 0;

  for (std::int32_t i = d; i != 0; i = pos_of(t.parent(piece[static_cast<std::size_t>(i)]))) {
    ws.on_path[static_cast<std::size_t>(i)] = 1;
  }

  // Part labels: 0 is T0 when the separator is below the root; children of
  // the separator open new parts; everything else inherits from its parent.
  std::int32_t num_parts = out.has_upper ? 1 : 0;
  ws.part[0] = out.has_upper ? 0 : -1;
  for (std::int32_t i = 1; i < m; ++i) {
    const VertexId v = piece[static_cast<std::size_t>(i)];
    const auto p = pos_of(t.parent(v));
    const auto ui = static_cast<std::size_t>(i);
    out.height[ui] = out.height[static_cast<std::size_t>(p)] + (ws.on_path[ui] ? parent_r[static_cast<std::size_t>(v)] : 0.0);
    if (i == d) {
      ws.part[ui] = 0;
      out.role[ui] = MemberRole::kSeparator;
    } else if (p == d) {
      ws.part[ui] = num_parts++;
      out.role[ui] = MemberRole::kLower;
    } else {
      ws.part[ui] = ws.part[static_cast<std::size_t>(p)];
      out.role[ui] = (out.has_upper && ws.part[ui] == 0) ? MemberRole::kUpper : MemberRole::kLower;
    }
  }

  out.parts.resize(static_cast<std::size_t>(num_parts));
  for (std::size_t k = out.has_upper ? 1 : 0; k < out.parts.size(); ++k) out.parts[k].push_back(out.separator);
  for (std::int32_t i = 0; i < m; ++i) {
    if (i == d && !out.has_upper) continue;
    out.parts[static_cast<std::size_t>(ws.part[static_cast<std::size_t>(i)])].push_back(piece[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace detail

// Separator split of the subtree of `t` spanned by `piece` (parents-first,
// piece[0] is the piece root). Heights use the resistances of `g`.
inline PieceSplit tree_decompose(const WeightedGraph& g, const SpanningTree& t, std::span<const VertexId> piece) {
  detail::SplitWorkspace ws(static_cast<std::size_t>(t.num_vertices()));
  const auto parent_r = detail::parent_resistances(g, t);
  return detail::split_piece(t, parent_r, piece, ws);
}

// Recursive separator-decomposition structure. Every node keeps two scalars
// about the path from its root to its separator:
//   d_drop: total potential drop induced on that path;
//   d_ext:  flow pushed through the whole path by updates at or beyond the
//           separator.
// A vertex is a non-root member of O(log n) nodes; `memberships(a)` lists
// them top-down and drives query/update.
class PathSumTree {
 public:
  struct Node {
    VertexId root;
    VertexId separator;
    std::int32_t size;
    std::int32_t parent;  // -1 for the top node
    std::vector<std::int32_t> children;
    double d_ext = 0.0;
    double d_drop = 0.0;

    bool base() const { return size == 2; }
  };

  PathSumTree() = default;

  PathSumTree(const WeightedGraph& g, const SpanningTree& t) : root_(t.root()), n_(t.num_vertices()) {
    const auto n = static_cast<std::size_t>(n_);
    membership_offsets_.assign(n + 1, 0);
    if (n < 2) return;
    const auto parent_r = detail::parent_resistances(g, t);
    detail::SplitWorkspace ws(n);

    struct Pending {
      std::vector<VertexId> piece;
      std::int32_t parent;
    };
    struct Tagged {
      VertexId vertex;
      Membership m;
    };
    std::vector<Tagged> tagged;
    tagged.reserve(n * 8);
    std::deque<Pending> queue;
    queue.push_back({std::vector<VertexId>(t.order().begin(), t.order().end()), -1});
    while (!queue.empty()) {
      Pending job = std::move(queue.front());
      queue.pop_front();
      auto split = detail::split_piece(t, parent_r, job.piece, ws);
      const auto id = static_cast<std::int32_t>(nodes_.size());
      nodes_.push_back({job.piece[0], split.separator, static_cast<std::int32_t>(job.piece.size()), job.parent, {}});
      if (job.parent >= 0) nodes_[static_cast<std::size_t>(job.parent)].children.push_back(id);
      for (std::size_t i = 1; i < job.piece.size(); ++i) {
        tagged.push_back({job.piece[i], {id, split.role[i], split.height[i]}});
      }
      for (auto& part : split.parts) {
        if (2 * part.size() > job.piece.size() + 2) {
          throw Error(ErrorCode::kDecompositionInvariantViolated,
                      "part of " + std::to_string(part.size()) + " vertices under a piece of " +
                          std::to_string(job.piece.size()));
        }
        queue.push_back({std::move(part), id});
      }
    }

    // Stable bucket by vertex keeps each chain in top-down order.
    std::vector<std::size_t> offsets(n + 1, 0);
    for (const auto& tg : tagged) ++offsets[static_cast<std::size_t>(tg.vertex) + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<Membership> bucketed(tagged.size());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& tg : tagged) bucketed[cursor[static_cast<std::size_t>(tg.vertex)]++] = tg.m;

    // A chain ends where its vertex is the separator; the leaf copy kept in
    // the upper part below that node is never consulted.
    memberships_.reserve(bucketed.size());
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t k = offsets[v]; k < offsets[v + 1]; ++k) {
        memberships_.push_back(bucketed[k]);
        if (bucketed[k].role == MemberRole::kSeparator) break;
      }
      membership_offsets_[v + 1] = memberships_.size();
    }
  }

  VertexId root() const { return root_; }
  VertexId num_vertices() const { return n_; }
  std::span<const Node> nodes() const { return nodes_; }

  std::span<const Membership> memberships(VertexId a) const {
    const auto begin = membership_offsets_[static_cast<std::size_t>(a)];
    const auto end = membership_offsets_[static_cast<std::size_t>(a) + 1];
    return std::span<const Membership>(memberships_).subspan(begin, end - begin);
  }

  // Nodes visited by a query or update at `a`.
  std::size_t touched(VertexId a) const { return memberships(a).size(); }

  double query(VertexId a) const {
    if (nodes_.empty()) return 0.0;
    return 0.0 - query_from(0, memberships(a), 0);
  }

  void update(VertexId a, double alpha) {
    if (nodes_.empty()) return;
    update_from(0, memberships(a), 0, alpha);
  }

 private:
  // Sum of f r along node-root -> a inside the node's subtree.
  double query_from(std::int32_t node, std::span<const Membership> chain, std::size_t level) const {
    if (level == chain.size()) return 0.0;  // a is this node's root
    const Membership& m = chain[level];
    assert(m.node == node);
    const Node& nd = nodes_[static_cast<std::size_t>(node)];
    switch (m.role) {
      case MemberRole::kSeparator:
        return nd.d_drop;
      case MemberRole::kUpper:
        return nd.d_ext * m.height + query_from(next_node(chain, level), chain, level + 1);
      case MemberRole::kLower:
        return nd.d_drop + query_from(next_node(chain, level), chain, level + 1);
    }
    return 0.0;
  }

  void update_from(std::int32_t node, std::span<const Membership> chain, std::size_t level, double alpha) {
    if (level == chain.size()) return;
    const Membership& m = chain[level];
    assert(m.node == node);
    Node& nd = nodes_[static_cast<std::size_t>(node)];
    nd.d_drop += alpha * m.height;
    if (nd.base()) return;
    if (m.role != MemberRole::kUpper) nd.d_ext += alpha;
    if (m.role == MemberRole::kSeparator) return;
    update_from(next_node(chain, level), chain, level + 1, alpha);
  }

  static std::int32_t next_node(std::span<const Membership> chain, std::size_t level) {
    return level + 1 < chain.size() ? chain[level + 1].node : -1;
  }

  VertexId root_ = 0;
  VertexId n_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::size_t> membership_offsets_{0};
  std::vector<Membership> memberships_;
};

// Flattened form: the whole state is one vector x holding (d_drop, d_ext)
// per decomposition node, and every vertex owns a sparse query vector q_a and
// update vector u_a, so that
//   query(a)         = -(q_a . x)
//   update(a, alpha) : x += alpha u_a.
// Nodes whose root is their own separator never contribute (every height
// there is 0) and are left out of the supports.
class FlatPathSum {
 public:
  struct Entry {
    std::uint32_t index;
    double coefficient;
  };

  FlatPathSum() = default;

  explicit FlatPathSum(const PathSumTree& tree) {
    const auto nodes = tree.nodes();
    const auto n = static_cast<std::size_t>(tree.num_vertices());
    state_.assign(nodes.size() * 2, 0.0);
    // Vertex a owns entries_[offsets_[2a], offsets_[2a+1]) for queries and
    // [offsets_[2a+1], offsets_[2a+2]) for updates.
    offsets_.assign(2 * n + 1, 0);
    std::vector<Entry> upd;
    for (std::size_t a = 0; a < n; ++a) {
      upd.clear();
      for (const auto& m : tree.memberships(static_cast<VertexId>(a))) {
        const auto& nd = nodes[static_cast<std::size_t>(m.node)];
        if (nd.root == nd.separator) continue;
        const auto drop = static_cast<std::uint32_t>(2 * m.node);
        const auto ext = drop + 1;
        switch (m.role) {
          case MemberRole::kUpper:
            if (m.height != 0.0) {
              entries_.push_back({ext, m.height});
              upd.push_back({drop, m.height});
            }
            break;
          case MemberRole::kSeparator:
          case MemberRole::kLower:
            entries_.push_back({drop, 1.0});
            upd.push_back({drop, m.height});
            if (!nd.base()) upd.push_back({ext, 1.0});
            break;
        }
      }
      offsets_[2 * a + 1] = entries_.size();
      entries_.insert(entries_.end(), upd.begin(), upd.end());
      offsets_[2 * a + 2] = entries_.size();
    }
  }

  FlatPathSum(const WeightedGraph& g, const SpanningTree& t) : FlatPathSum(PathSumTree(g, t)) {}

  // Summed deepest node first, the same association as the recursive query.
  double query(VertexId a) const {
    const auto q = query_vector(a);
    double sum = 0.0;
    for (auto it = q.rbegin(); it != q.rend(); ++it) sum = it->coefficient * state_[it->index] + sum;
    return 0.0 - sum;
  }

  void update(VertexId a, double alpha) {
    for (const auto& e : update_vector(a)) state_[e.index] += alpha * e.coefficient;
  }

  std::span<const Entry> query_vector(VertexId a) const { return block(2 * static_cast<std::size_t>(a)); }
  std::span<const Entry> update_vector(VertexId a) const { return block(2 * static_cast<std::size_t>(a) + 1); }

  std::span<const double> state() const { return state_; }
  std::size_t state_dimension() const { return state_.size(); }
  void reset() { std::fill(state_.begin(), state_.end(), 0.0); }

  // Zeroes the state entries an update at `a` would touch.
  void clear_support(VertexId a) {
    for (const auto& e : update_vector(a)) state_[e.index] = 0.0;
  }

  // Cache hints for an upcoming query/update at `a`, in dependency order:
  // offsets, then entries, then the state they point at.
  void prefetch_offsets(VertexId a) const { __builtin_prefetch(&offsets_[2 * static_cast<std::size_t>(a)]); }

  void prefetch_entries(VertexId a) const {
    const auto* p = reinterpret_cast<const char*>(entries_.data() + offsets_[2 * static_cast<std::size_t>(a)]);
    const auto* end = reinterpret_cast<const char*>(entries_.data() + offsets_[2 * static_cast<std::size_t>(a) + 2]);
    for (; p < end; p += 64) __builtin_prefetch(p);
  }

  // The update entries cover every node of the chain, and a node's two
  // scalars share a cache line.
  void prefetch_state(VertexId a) const {
    for (const auto& e : update_vector(a)) __builtin_prefetch(&state_[e.index], 1);
  }

 private:
  std::span<const Entry> block(std::size_t k) const {
    return std::span<const Entry>(entries_).subspan(offsets_[k], offsets_[k + 1] - offsets_[k]);
  }

  LargeVector<double> state_;
  LargeVector<std::size_t> offsets_{0};
  LargeVector<Entry> entries_;
};

// Pushes the given tree-edge flows (indexed by graph edge id, graph
// orientation) into a fresh structure: one update per non-root vertex with
// the flow its parent edge carries beyond its children's edges.
template <PathSumStructure DS>
void load_tree_flows(DS& ds, const SpanningTree& t, std::span<const double> edge_flow) {
  const auto n = static_cast<std::size_t>(t.num_vertices());
  std::vector<double> away(n, 0.0);  // flow parent -> v on v's parent edge
  for (VertexId v : t.order()) {
    if (v == t.root()) continue;
    away[static_cast<std::size_t>(v)] = t.parent_sign(v) * edge_flow[static_cast<std::size_t>(t.parent_edge(v))];
  }
  std::vector<double> own = away;
  for (VertexId v : t.order()) {
    if (v == t.root()) continue;
    const VertexId p = t.parent(v);
    if (p != t.root()) own[static_cast<std::size_t>(p)] -= away[static_cast<std::size_t>(v)];
  }
  for (VertexId v : t.order()) {
    if (v != t.root() && own[static_cast<std::size_t>(v)] != 0.0) ds.update(v, own[static_cast<std::size_t>(v)]);
  }
}

// Tree-edge flows represented by `ds` (graph orientation; zero off the tree):
// potential drop across the edge divided by its resistance.
template <PathSumStructure DS>
FlowVector materialize_tree_flows(const DS& ds, const WeightedGraph& g, const SpanningTree& t) {
  FlowVector f(static_cast<std::size_t>(g.num_edges()), 0.0);
  std::vector<double> v(static_cast<std::size_t>(g.num_vertices()));
  for (VertexId a = 0; a < g.num_vertices(); ++a) v[static_cast<std::size_t>(a)] = ds.query(a);
  for (VertexId c : t.order()) {
    if (c == t.root()) continue;
    const EdgeId e = t.parent_edge(c);
    const auto& edge = g.edge(e);
    f[static_cast<std::size_t>(e)] =
        (v[static_cast<std::size_t>(edge.tail)] - v[static_cast<std::size_t>(edge.head)]) / edge.resistance;
  }
  return f;
}

// R_e for every off-tree edge (order of t.off_tree()) using a scratch
// structure: a unit flow a -> b along the tree leaves a potential drop equal
// to the tree path resistance.
inline std::vector<double> compute_all_cycle_resistances(const WeightedGraph& g, const SpanningTree& t) {
  FlatPathSum ds(g, t);
  const auto off = t.off_tree();
  std::vector<double> out(off.size());
  for (std::size_t i = 0; i < off.size(); ++i) {
    const auto& e = g.edge(off[i]);
    ds.update(e.head, 1.0);
    ds.update(e.tail, -1.0);
    out[i] = ds.query(e.tail) - ds.query(e.head) + e.resistance;
    ds.clear_support(e.head);
    ds.clear_support(e.tail);
  }
  return out;
}

}  // namespace sddflow
