// Electrical flow on a triangle: one unit from vertex 0 to vertex 2.
#include <cstdio>
#include <vector>

#include "sddflow/sddflow.hpp"

int main() {
  using namespace sddflow;
  const auto g = build_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
  const std::vector<double> chi{1.0, 0.0, -1.0};

  SolverOptions options;
  options.eps = 1e-6;
  options.seed = 7;
  options.variant = SolverVariant::kFull;
  const auto r = solve(g, chi, options);

  std::printf("energy %.12f after %lld updates\n", r.energy, static_cast<long long>(r.iterations));
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    std::printf("  f(%d,%d) = %+.6f\n", g.edge(e).tail, g.edge(e).head, r.flow[static_cast<std::size_t>(e)]);
  }
  for (VertexId v = 0; v < g.num_vertices(); ++v) std::printf("  v(%d) = %+.6f\n", v, r.voltages[static_cast<std::size_t>(v)]);
}
