#pragma once

// Command-line front end. Requires CLI11 and Eigen (through the oracle).

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sddflow/error.hpp"
#include "sddflow/io.hpp"
#include "sddflow/oracle.hpp"
#include "sddflow/report.hpp"
#include "sddflow/sdd.hpp"
#include "sddflow/solver.hpp"
#include "sddflow/spanning_tree.hpp"

namespace sddflow {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitVerifyFailed = 2;

enum class InputKind { kGraph, kSdd };

struct RunConfig {
  std::string command;
  std::string input_path;
  std::string vector_path;
  InputKind kind = InputKind::kGraph;
  double eps = 0.1;
  std::uint64_t seed = 1;
  std::string solver = "full";
  std::string tree = "lowstretch";
  std::string report = "text";
  bool verify = false;
  std::optional<std::int64_t> max_iterations;
  VertexId root = 0;
  std::string out_path;
  std::string emit_tree_path;
  int trials = 10;
  VertexId oracle_cap = kDefaultOracleCap;
};

namespace cli_detail {

inline SolverVariant parse_variant(const std::string& s) {
  if (s == "simple") return SolverVariant::kSimple;
  if (s == "example") return SolverVariant::kExample;
  if (s == "full") return SolverVariant::kFull;
  throw Error(ErrorCode::kBadOption, "unknown solver '" + s + "'");
}

inline ReportFormat parse_format(const std::string& s) {
  if (s == "text") return ReportFormat::kText;
  if (s == "structured") return ReportFormat::kStructured;
  throw Error(ErrorCode::kBadOption, "unknown report format '" + s + "'");
}

inline SpanningTree make_tree(const WeightedGraph& g, const RunConfig& c) {
  if (c.tree == "lowstretch") return build_tree(g, TreeStrategy::kLowStretch, c.seed, c.root);
  if (c.tree == "mst") return build_tree(g, TreeStrategy::kMinResistance, c.seed, c.root);
  if (c.tree.rfind("file:", 0) == 0) {
    const auto spec = parse_tree(c.tree.substr(5), g);
    return build_tree(g, TreeStrategy::kGiven, c.seed, spec.root, spec.edges);
  }
  throw Error(ErrorCode::kBadOption, "unknown tree strategy '" + c.tree + "'");
}

inline SolverOptions make_options(const RunConfig& c, std::uint64_t seed) {
  SolverOptions o;
  o.eps = c.eps;
  o.seed = seed;
  o.variant = parse_variant(c.solver);
  o.max_iterations = c.max_iterations;
  o.root = c.root;
  validate_options(o);
  return o;
}

inline void add_solve_fields(Report& r, const SolveReport& s, const WeightedGraph& g) {
  r.add("n", static_cast<int>(g.num_vertices()));
  r.add("m", static_cast<int>(g.num_edges()));
  r.add("total_stretch", s.total_stretch);
  r.add("tau", s.tau);
  r.add("iterations", s.iterations);
  r.add("effective_iterations", s.effective_iterations);
  r.add("stages", static_cast<int>(s.stages.size()));
  for (std::size_t i = 0; i < s.stages.size(); ++i) {
    const auto p = "stage" + std::to_string(i + 1) + "_";
    r.add(p + "scale", s.stages[i].scale);
    r.add(p + "planned", s.stages[i].planned);
    r.add(p + "executed", s.stages[i].executed);
  }
  r.add("energy", s.energy);
  r.add("dual_energy", s.dual_energy);
  r.add("gap", s.gap);
  r.add("residual_inf", s.max_residual);
}

struct LaplacianCheck {
  double optimum;
  double energy_ratio;
  double voltage_error;  // relative, L-norm
  bool energy_ok;
  bool voltage_ok;
};

inline LaplacianCheck check_laplacian(const WeightedGraph& g, const SolveReport& s, const OracleResult& oracle,
                                      double eps) {
  LaplacianCheck c;
  c.optimum = oracle.energy;
  const double ref_norm = laplacian_norm(g, oracle.voltages);
  const double err = laplacian_norm_error(g, s.voltages, oracle.voltages);
  c.energy_ratio = oracle.energy > 0.0 ? s.energy / oracle.energy : (s.energy > 0.0 ? INFINITY : 1.0);
  c.voltage_error = ref_norm > 0.0 ? err / ref_norm : err;
  c.energy_ok = s.energy <= (1.0 + eps) * oracle.energy * (1.0 + 1e-12) + 1e-14;
  c.voltage_ok = err <= std::sqrt(eps) * ref_norm * (1.0 + 1e-12) + 1e-14;
  return c;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline int run_graph_solve(const RunConfig& c, Report& r) {
  const auto g = parse_graph(c.input_path);
  const auto chi = parse_vector(c.vector_path, static_cast<std::size_t>(g.num_vertices()), VectorKind::kDemand);
  const auto t = make_tree(g, c);
  const auto o = make_options(c, c.seed);
  const auto s = solve(g, t, chi, o);
  r.add("command", c.command);
  r.add("solver", to_string(o.variant));
  r.add("tree", c.tree);
  r.add("seed", c.seed);
  r.add("eps", c.eps);
  add_solve_fields(r, s, g);
  int code = kExitOk;
  if (c.verify) {
    const auto oracle = dense_oracle(g, chi, c.oracle_cap);
    const auto check = check_laplacian(g, s, oracle, c.eps);
    r.add("oracle_energy", check.optimum);
    r.add("energy_ratio", check.energy_ratio);
    r.add("voltage_error", check.voltage_error);
    const bool ok = check.energy_ok && check.voltage_ok;
    r.add("verify", ok ? "pass" : "fail");
    if (!ok) code = kExitVerifyFailed;
  }
  if (!c.out_path.empty()) write_text(c.out_path, emit_vector(c.command == "flow" ? s.flow : s.voltages));
  r.add("wall_time", s.wall_time_seconds);
  return code;
}

inline int run_sdd_solve(const RunConfig& c, Report& r) {
  const auto a = parse_matrix(c.input_path);
  const auto b = parse_vector(c.vector_path, static_cast<std::size_t>(a.dimension()));
  auto o = make_options(c, c.seed);
  if (c.tree.rfind("file:", 0) == 0) throw Error(ErrorCode::kBadOption, "tree files are not supported for solve-sdd");
  o.tree = c.tree == "mst" ? TreeStrategy::kMinResistance : TreeStrategy::kLowStretch;
  const auto start = std::chrono::steady_clock::now();
  const auto sol = solve_sdd(a, b, o);
  const auto ax = a.multiply(sol.x);
  double residual = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) residual = std::max(residual, std::abs(ax[i] - b[i]));
  r.add("command", c.command);
  r.add("solver", to_string(o.variant));
  r.add("tree", c.tree);
  r.add("seed", c.seed);
  r.add("eps", c.eps);
  r.add("n", static_cast<int>(a.dimension()));
  r.add("nonzeros", static_cast<std::int64_t>(a.entries().size()));
  r.add("components", static_cast<int>(sol.components.size()));
  r.add("iterations", sol.iterations);
  r.add("residual_inf", residual);
  int code = kExitOk;
  if (c.verify) {
    const auto x = dense_solve(a, b, c.oracle_cap);
    const double ref = matrix_norm(a, x);
    const double err = matrix_norm_error(a, sol.x, x);
    const double rel = ref > 0.0 ? err / ref : err;
    r.add("a_norm_error", rel);
    const bool ok = err <= std::sqrt(c.eps) * ref * (1.0 + 1e-12) + 1e-14;
    r.add("verify", ok ? "pass" : "fail");
    if (!ok) code = kExitVerifyFailed;
  }
  if (!c.out_path.empty()) write_text(c.out_path, emit_vector(sol.x));
  r.add("wall_time", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return code;
}

inline int run_tree_stats(const RunConfig& c, Report& r) {
  const auto g = parse_graph(c.input_path);
  const auto t = make_tree(g, c);
  const auto s = compute_stretch(g, t);
  double max_stretch = 0.0;
  double sum = 0.0;
  for (double x : s.stretch) {
    max_stretch = std::max(max_stretch, x);
    sum += x;
  }
  r.add("command", c.command);
  r.add("tree", c.tree);
  r.add("seed", c.seed);
  r.add("root", static_cast<int>(t.root()));
  r.add("n", static_cast<int>(g.num_vertices()));
  r.add("m", static_cast<int>(g.num_edges()));
  r.add("off_tree", static_cast<int>(s.off_tree.size()));
  r.add("total_stretch", s.total_stretch);
  r.add("tau", s.tau);
  r.add("max_stretch", max_stretch);
  r.add("mean_off_tree_stretch", s.stretch.empty() ? 0.0 : sum / static_cast<double>(s.stretch.size()));
  if (!c.emit_tree_path.empty()) write_text(c.emit_tree_path, emit_tree(t));
  return kExitOk;
}

// Repeats the solve over `trials` consecutive seeds and compares each run with
// the dense oracle; passes when the medians meet the bounds.
inline int run_verify(const RunConfig& c, Report& r) {
  r.add("command", c.command);
  r.add("solver", c.solver);
  r.add("seed", c.seed);
  r.add("eps", c.eps);
  r.add("trials", c.trials);
  const auto start = std::chrono::steady_clock::now();
  bool ok = false;
  if (c.kind == InputKind::kSdd) {
    const auto a = parse_matrix(c.input_path);
    const auto b = parse_vector(c.vector_path, static_cast<std::size_t>(a.dimension()));
    const auto x = dense_solve(a, b, c.oracle_cap);
    const double ref = matrix_norm(a, x);
    std::vector<double> errors;
    int passes = 0;
    for (int k = 0; k < c.trials; ++k) {
      auto o = make_options(c, c.seed + static_cast<std::uint64_t>(k));
      o.tree = c.tree == "mst" ? TreeStrategy::kMinResistance : TreeStrategy::kLowStretch;
      const auto sol = solve_sdd(a, b, o);
      const double err = matrix_norm_error(a, sol.x, x);
      errors.push_back(ref > 0.0 ? err / ref : err);
      if (err <= std::sqrt(c.eps) * ref * (1.0 + 1e-12) + 1e-14) ++passes;
    }
    const double med = median(errors);
    r.add("a_norm_error_median", med);
    r.add("pass_count", passes);
    ok = med <= std::sqrt(c.eps) * (1.0 + 1e-12) || (ref == 0.0 && med <= 1e-14);
  } else {
    const auto g = parse_graph(c.input_path);
    const auto chi = parse_vector(c.vector_path, static_cast<std::size_t>(g.num_vertices()), VectorKind::kDemand);
    const auto oracle = dense_oracle(g, chi, c.oracle_cap);
    std::vector<double> ratios;
    std::vector<double> errors;
    int energy_passes = 0;
    int voltage_passes = 0;
    for (int k = 0; k < c.trials; ++k) {
      RunConfig ck = c;
      ck.seed = c.seed + static_cast<std::uint64_t>(k);
      const auto t = make_tree(g, ck);
      const auto s = solve(g, t, chi, make_options(c, ck.seed));
      const auto check = check_laplacian(g, s, oracle, c.eps);
      ratios.push_back(check.energy_ratio);
      errors.push_back(check.voltage_error);
      energy_passes += check.energy_ok;
      voltage_passes += check.voltage_ok;
    }
    const double med_ratio = median(ratios);
    const double med_error = median(errors);
    r.add("oracle_energy", oracle.energy);
    r.add("energy_ratio_median", med_ratio);
    r.add("voltage_error_median", med_error);
    r.add("energy_pass_count", energy_passes);
    r.add("voltage_pass_count", voltage_passes);
    ok = med_ratio <= (1.0 + c.eps) * (1.0 + 1e-12) && med_error <= std::sqrt(c.eps) * (1.0 + 1e-12);
  }
  r.add("verify", ok ? "pass" : "fail");
  r.add("wall_time", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return ok ? kExitOk : kExitVerifyFailed;
}

}  // namespace cli_detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Electrical flows and SDD systems by randomized cycle updates", "sddflow"};
  app.require_subcommand(1);

  auto add_common = [&c](CLI::App* sub, bool solve) {
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--tree", c.tree, "lowstretch | mst | file:<path>")->capture_default_str();
    sub->add_option("--root", c.root, "tree root vertex")->capture_default_str();
    sub->add_option("--report", c.report, "text | structured")
        ->check(CLI::IsMember({"text", "structured"}))
        ->capture_default_str();
    if (!solve) return;
    sub->add_option("--eps", c.eps, "target accuracy")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--solver", c.solver, "simple | example | full")
        ->check(CLI::IsMember({"simple", "example", "full"}))
        ->capture_default_str();
    sub->add_option("--max-iter", c.max_iterations, "cap on total cycle updates")->check(CLI::NonNegativeNumber);
    sub->add_option("--oracle-cap", c.oracle_cap, "largest dimension for the dense oracle")->capture_default_str();
  };

  for (const char* name : {"flow", "solve-lap"}) {
    auto* sub = app.add_subcommand(name, std::string(name) == "flow" ? "approximate electrical flow for a demand"
                                                                      : "approximate solution of L x = b");
    sub->add_option("graph", c.input_path, "graph file (edge list or Matrix Market Laplacian)")->required();
    sub->add_option("vector", c.vector_path, "demand / right-hand side, one value per line")->required();
    sub->add_flag("--verify", c.verify, "compare with the dense oracle (exit 2 on failure)");
    sub->add_option("--out", c.out_path, std::string("write the ") + (std::string(name) == "flow" ? "flow" : "solution"));
    add_common(sub, true);
  }
  {
    auto* sub = app.add_subcommand("solve-sdd", "approximate solution of A x = b for a symmetric diagonally dominant A");
    sub->add_option("matrix", c.input_path, "Matrix Market file")->required();
    sub->add_option("vector", c.vector_path, "right-hand side, one value per line")->required();
    sub->add_flag("--verify", c.verify, "compare with a dense solve (exit 2 on failure)");
    sub->add_option("--out", c.out_path, "write the solution");
    add_common(sub, true);
  }
  {
    auto* sub = app.add_subcommand("tree-stats", "stretch statistics of a spanning tree");
    sub->add_option("graph", c.input_path, "graph file")->required();
    sub->add_option("--emit-tree", c.emit_tree_path, "write the tree in tree-file format");
    add_common(sub, false);
  }
  {
    auto* sub = app.add_subcommand("verify", "repeat a solve over several seeds against the dense oracle");
    sub->add_option("input", c.input_path, "graph file, or Matrix Market SDD matrix with --sdd")->required();
    sub->add_option("vector", c.vector_path, "demand / right-hand side")->required();
    sub->add_option("--trials", c.trials, "number of seeds")->check(CLI::PositiveNumber)->capture_default_str();
    bool sdd = false;
    sub->add_flag("--sdd", sdd, "input is an SDD matrix")->each([&c](const std::string&) { c.kind = InputKind::kSdd; });
    add_common(sub, true);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  c.command = app.get_subcommands().front()->get_name();
  try {
    const auto format = cli_detail::parse_format(c.report);
    Report r;
    int code = kExitOk;
    if (c.command == "flow" || c.command == "solve-lap") {
      code = cli_detail::run_graph_solve(c, r);
    } else if (c.command == "solve-sdd") {
      code = cli_detail::run_sdd_solve(c, r);
    } else if (c.command == "tree-stats") {
      code = cli_detail::run_tree_stats(c, r);
    } else {
      code = cli_detail::run_verify(c, r);
    }
    out << r.render(format);
    if (code == kExitVerifyFailed) err << "verification failed\n";
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return kExitInputError;
  }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace sddflow
