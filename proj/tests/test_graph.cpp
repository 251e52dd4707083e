#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sddflow/graph.hpp"
#include "sddflow/sampling.hpp"
#include "test_support.hpp"

namespace {

using namespace sddflow;
using testing_support::Engine;

WeightedGraph k3() { return build_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}}); }

template <typename F>
void expect_code(ErrorCode code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(BuildGraph, StoresEdgesAsGiven) {
  const auto g = k3();
  EXPECT_EQ(g.num_vertices(), 3);
  EXPECT_EQ(g.num_edges(), 3);
  EXPECT_EQ(g.edge(2), (Edge{0, 2, 1.0}));
  EXPECT_EQ(g.incident(0).size(), 2u);
}

TEST(BuildGraph, MergesParallelEdgesByConductance) {
  const auto g = build_graph(2, {{0, 1, 2.0}, {1, 0, 2.0}});
  ASSERT_EQ(g.num_edges(), 1);
  EXPECT_DOUBLE_EQ(g.resistance(0), 1.0);
}

TEST(BuildGraph, RejectsBadInput) {
  expect_code(ErrorCode::kSelfLoop, [] { build_graph(2, {{1, 1, 1.0}}); });
  expect_code(ErrorCode::kNonpositiveResistance, [] { build_graph(2, {{0, 1, 0.0}}); });
  expect_code(ErrorCode::kNonpositiveResistance, [] { build_graph(2, {{0, 1, -3.0}}); });
  expect_code(ErrorCode::kVertexOutOfRange, [] { build_graph(2, {{0, 2, 1.0}}); });
}

TEST(Divergence, OutflowMinusInflow) {
  const auto g = k3();
  const std::vector<double> f{1.0, 1.0, 0.0};
  EXPECT_EQ(divergence(g, f), (std::vector<double>{1.0, 0.0, -1.0}));
  const auto single = build_graph(2, {{0, 1, 5.0}});
  EXPECT_EQ(divergence(single, std::vector<double>{2.5}), (std::vector<double>{2.5, -2.5}));
  EXPECT_EQ(divergence(g, std::vector<double>(3, 0.0)), std::vector<double>(3, 0.0));
  expect_code(ErrorCode::kDimensionMismatch, [&] { divergence(g, std::vector<double>(2, 0.0)); });
}

TEST(Energy, Examples) {
  const auto g = k3();
  EXPECT_DOUBLE_EQ(energy(g, std::vector<double>{1.0, 1.0, 0.0}), 2.0);
  EXPECT_NEAR(energy(g, std::vector<double>{1.0 / 3, 1.0 / 3, 2.0 / 3}), 2.0 / 3, 1e-15);
  EXPECT_EQ(energy(g, std::vector<double>(3, 0.0)), 0.0);
}

TEST(DualEnergy, AtOptimalPotentials) {
  const auto g = k3();
  const std::vector<double> chi{1.0, 0.0, -1.0};
  // Tree-induced voltages of the optimal flow (root 0).
  EXPECT_NEAR(dual_energy(g, std::vector<double>{0.0, -1.0 / 3, -2.0 / 3}, chi), 2.0 / 3, 1e-15);
  // L+ chi itself.
  EXPECT_NEAR(dual_energy(g, std::vector<double>{1.0 / 3, 0.0, -1.0 / 3}, chi), 2.0 / 3, 1e-15);
  EXPECT_EQ(dual_energy(g, std::vector<double>(3, 0.0), chi), 0.0);
}

TEST(DualityGap, OptimalPairHasZeroGap) {
  const auto g = k3();
  const std::vector<double> chi{1.0, 0.0, -1.0};
  const std::vector<double> f{1.0 / 3, 1.0 / 3, 2.0 / 3};
  EXPECT_NEAR(duality_gap(g, f, std::vector<double>{1.0 / 3, 0.0, -1.0 / 3}, chi), 0.0, 1e-15);
  EXPECT_NEAR(duality_gap(g, std::vector<double>{1.0, 1.0, 0.0}, std::vector<double>{1.0 / 3, 0.0, -1.0 / 3}, chi),
              2.0 - 2.0 / 3, 1e-15);
  expect_code(ErrorCode::kInfeasibleFlow, [&] {
    duality_gap(g, std::vector<double>{1.0, 0.0, 0.0}, std::vector<double>(3, 0.0), chi);
  });
}

TEST(DualityGap, WeakDualityOnRandomInstances) {
  Engine rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing_support::random_connected_graph(12, 30, rng);
    const auto chi = testing_support::random_demand(12, rng);
    // A feasible flow: route chi along a BFS tree, then add a random cycle.
    const auto t = SpanningTree::from_edges(g, min_resistance_tree_edges(g));
    std::vector<double> below(chi.begin(), chi.end());
    std::vector<double> f(static_cast<std::size_t>(g.num_edges()), 0.0);
    for (auto it = t.order().rbegin(); it != t.order().rend(); ++it) {
      if (*it == t.root()) continue;
      f[static_cast<std::size_t>(t.parent_edge(*it))] = -t.parent_sign(*it) * below[static_cast<std::size_t>(*it)];
      below[static_cast<std::size_t>(t.parent(*it))] += below[static_cast<std::size_t>(*it)];
    }
    std::vector<double> v(12);
    for (auto& x : v) x = testing_support::uniform(rng, -5, 5);
    EXPECT_GE(duality_gap(g, f, v, chi), -1e-9);
  }
}

TEST(Laplacian, MatchesEntrywiseDefinition) {
  Engine rng(3);
  const auto g = testing_support::random_connected_graph(15, 40, rng);
  const auto l = testing_support::dense_laplacian_entries(g);
  std::vector<double> x(15);
  for (auto& v : x) v = testing_support::uniform(rng, -1, 1);
  const auto lx = apply_laplacian(g, x);
  double quad = 0.0;
  for (std::size_t i = 0; i < 15; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 15; ++j) row += l[i][j] * x[j];
    EXPECT_NEAR(lx[i], row, 1e-12);
    quad += x[i] * row;
  }
  EXPECT_NEAR(laplacian_quadratic_form(g, x), quad, 1e-10);
}

TEST(Components, Examples) {
  EXPECT_EQ(connected_components(build_graph(4, {{0, 1, 1.0}, {2, 3, 1.0}})).count, 2);
  EXPECT_EQ(connected_components(k3()).count, 1);
  const auto empty = connected_components(build_graph(5, std::span<const RawEdge>{}));
  EXPECT_EQ(empty.count, 5);
  EXPECT_EQ(empty.label, (std::vector<VertexId>{0, 1, 2, 3, 4}));
}

TEST(Rng, ReproducibleAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(a.below(7), 7u);
    b.below(7);
  }
}

TEST(AliasTable, MatchesWeights) {
  const std::vector<double> w{3.0, 1.0, 0.0, 4.0};
  AliasTable table(w);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(table.probability(i), w[i] / 8.0, 1e-15);
  Rng rng(5);
  std::vector<int> counts(4, 0);
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) ++counts[table.sample(rng)];
  EXPECT_EQ(counts[2], 0);
  EXPECT_NEAR(counts[0] / double(draws), 3.0 / 8, 0.005);
  EXPECT_NEAR(counts[3] / double(draws), 0.5, 0.005);
}

}  // namespace
