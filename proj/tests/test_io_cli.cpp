#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sddflow/cli.hpp"
#include "sddflow/io.hpp"
#include "sddflow/oracle.hpp"
#include "sddflow/report.hpp"
#include "test_support.hpp"

namespace {

using namespace sddflow;
using testing_support::Engine;
namespace fs = std::filesystem;

const std::string kSamples = SDDFLOW_SAMPLES_DIR;

std::string sample(const char* name) { return kSamples + "/" + name; }

template <typename F>
Error capture(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error raised";
  return Error(ErrorCode::kIoError, "none");
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("sddflow-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& text = "") const {
    const auto p = (path_ / name).string();
    if (!text.empty()) write_text(p, text);
    return p;
  }

 private:
  fs::path path_;
};

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string field(const std::string& structured, const std::string& key) {
  for (const auto& [k, v] : parse_structured_report(structured)) {
    if (k == key) return v;
  }
  return "";
}

TEST(ParseGraph, EdgeList) {
  const auto g = parse_graph(sample("k3.graph"));
  EXPECT_EQ(g.num_vertices(), 3);
  EXPECT_EQ(g.num_edges(), 3);
  const auto e = capture([] { parse_graph_text("p graph 2 1\n0 0 1\n"); });
  EXPECT_EQ(e.code(), ErrorCode::kSelfLoop);
  EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();

  EXPECT_EQ(capture([] { parse_graph_text("p graph 2 1\n# note\n0 1 x\n"); }).code(), ErrorCode::kParseError);
  EXPECT_NE(std::string(capture([] { parse_graph_text("p graph 2 1\n# note\n0 1 x\n"); }).what()).find("line 3"),
            std::string::npos);
  EXPECT_EQ(capture([] { parse_graph_text("p graph 2 1\n0 5 1\n"); }).code(), ErrorCode::kVertexOutOfRange);
  EXPECT_EQ(capture([] { parse_graph_text("p graph 2 1\n0 1 -1\n"); }).code(), ErrorCode::kNonpositiveResistance);
  EXPECT_EQ(capture([] { parse_graph_text("p graph 2 2\n0 1 1\n"); }).code(), ErrorCode::kParseError);
  EXPECT_EQ(capture([] { parse_graph_text("graph 2 1\n0 1 1\n"); }).code(), ErrorCode::kParseError);
  EXPECT_EQ(capture([] { parse_graph("/nonexistent/file.graph"); }).code(), ErrorCode::kIoError);
}

TEST(ParseGraph, MatrixMarketMatchesEdgeList) {
  const auto mm = parse_graph(sample("k3.mtx"));
  const auto el = parse_graph(sample("k3.graph"));
  ASSERT_EQ(mm.num_vertices(), el.num_vertices());
  ASSERT_EQ(mm.num_edges(), el.num_edges());
  auto sorted = [](const WeightedGraph& g) {
    std::vector<Edge> e(g.edges().begin(), g.edges().end());
    std::sort(e.begin(), e.end(), [](const Edge& a, const Edge& b) { return std::pair{a.tail, a.head} < std::pair{b.tail, b.head}; });
    return e;
  };
  EXPECT_EQ(sorted(mm), sorted(el));
  EXPECT_EQ(testing_support::dense_laplacian_entries(mm), testing_support::dense_laplacian_entries(el));

  const auto bad = capture([] {
    parse_graph_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n2 1 -1\n2 2 1\n");
  });
  EXPECT_EQ(bad.code(), ErrorCode::kInconsistentLaplacian);
  EXPECT_EQ(capture([] { parse_graph_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1\n2 1 1\n2 2 1\n"); })
                .code(),
            ErrorCode::kInconsistentLaplacian);
}

TEST(ParseGraph, RoundTripIsExact) {
  Engine rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing_support::random_connected_graph(30, 80, rng, 1e-3, 1e3);
    EXPECT_EQ(parse_graph_text(emit_graph(g)), g);
  }
  const auto a = testing_support::random_sdd(20, 3, rng);
  std::istringstream in(emit_matrix(a));
  EXPECT_EQ(parse_matrix(in), a);
}

TEST(ParseVector, Examples) {
  std::istringstream three("1\n0\n-1\n");
  EXPECT_EQ(parse_vector(three, 3, VectorKind::kDemand), (std::vector<double>{1, 0, -1}));
  std::istringstream two("1\n-1\n");
  EXPECT_EQ(capture([&] { parse_vector(two, 3); }).code(), ErrorCode::kLengthMismatch);
  std::istringstream unbalanced("1\n0\n0\n");
  EXPECT_EQ(capture([&] { parse_vector(unbalanced, 3, VectorKind::kDemand); }).code(), ErrorCode::kDemandNotBalanced);
  std::istringstream junk("1\nabc\n");
  EXPECT_EQ(capture([&] { parse_vector(junk, 2); }).code(), ErrorCode::kParseError);
  const std::vector<double> x{0.1, -1e-300, 3.0, 1.0 / 3.0};
  std::istringstream back(emit_vector(x));
  EXPECT_EQ(parse_vector(back, 4), x);
}

TEST(TreeFile, RoundTrip) {
  Engine rng(7);
  const auto g = testing_support::random_connected_graph(25, 60, rng);
  const auto t = build_tree(g, TreeStrategy::kLowStretch, 4, 6);
  std::istringstream in(emit_tree(t));
  const auto spec = parse_tree(in, g);
  EXPECT_EQ(spec.root, 6);
  const auto back = build_tree(g, TreeStrategy::kGiven, 0, spec.root, spec.edges);
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    EXPECT_EQ(back.parent(v), t.parent(v));
    EXPECT_EQ(back.parent_edge(v), t.parent_edge(v));
  }

  const auto k3 = parse_graph(sample("k3.graph"));
  std::istringstream wrong("0 0\n0 1\n2 -1\n");
  EXPECT_EQ(capture([&] { parse_tree(wrong, k3); }).code(), ErrorCode::kInvalidTreeEdges);
  std::istringstream short_file("0 0\n0 1\n");
  EXPECT_EQ(capture([&] { parse_tree(short_file, k3); }).code(), ErrorCode::kLengthMismatch);
}

TEST(Report, StructuredRoundTrip) {
  Report r;
  r.add("energy", 2.0 / 3.0);
  r.add("iterations", std::int64_t{12});
  r.add("verify", "pass");
  const auto text = r.render(ReportFormat::kStructured);
  EXPECT_EQ(text.rfind("schema sddflow-report/1\n", 0), 0u);
  const auto parsed = parse_structured_report(text);
  ASSERT_EQ(parsed.size(), 3u);
  EXPECT_EQ(std::stod(parsed[0].second), 2.0 / 3.0);
  EXPECT_EQ(capture([] { parse_structured_report("schema other/9\nx 1\n"); }).code(), ErrorCode::kParseError);
}

TEST(DenseOracle, Examples) {
  const auto k3 = parse_graph(sample("k3.graph"));
  const auto r = dense_oracle(k3, std::vector<double>{1, 0, -1});
  EXPECT_NEAR(r.energy, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.flow[0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.flow[1], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.flow[2], 2.0 / 3.0, 1e-12);
  EXPECT_EQ(r.null_dimension, 1);

  const auto zero = dense_oracle(k3, std::vector<double>{0, 0, 0});
  for (double f : zero.flow) EXPECT_EQ(f, 0.0);

  const auto c4 = parse_graph(sample("c4.graph"));
  const auto c = dense_oracle(c4, std::vector<double>{1, 0, -1, 0});
  EXPECT_NEAR(c.energy, 1.0, 1e-12);
  for (double f : c.flow) EXPECT_NEAR(std::abs(f), 0.5, 1e-12);

  EXPECT_EQ(capture([&] { dense_oracle(k3, std::vector<double>{1, 0, -1}, 2); }).code(), ErrorCode::kTooLarge);
}

TEST(DenseOracle, OptimalFlowSatisfiesCycleLaw) {
  Engine rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = testing_support::random_connected_graph(40, 120, rng);
    const auto t = build_tree(g, TreeStrategy::kLowStretch, static_cast<std::uint64_t>(trial));
    const auto r = dense_oracle(g, testing_support::random_demand(40, rng));
    double scale = 0.0;
    for (EdgeId e = 0; e < g.num_edges(); ++e) scale = std::max(scale, std::abs(r.flow[static_cast<std::size_t>(e)]) * g.resistance(e));
    for (EdgeId e : t.off_tree()) EXPECT_NEAR(testing_support::direct_cycle_potential(g, t, r.flow, e), 0.0, 1e-8 * scale);
  }
}

TEST(ProjectionMatrices, Properties) {
  Engine rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 8 + testing_support::below(rng, 20);
    const auto g = testing_support::random_connected_graph(n, 2 * n, rng);
    const auto t = build_tree(g, TreeStrategy::kLowStretch, static_cast<std::uint64_t>(trial));
    const auto p = build_projection_matrices(g, t);
    const auto& pg = p.onto_potential;
    EXPECT_NEAR(pg.trace(), n - 1, 1e-9);
    EXPECT_LE((pg * pg - pg).norm(), 1e-9);
    EXPECT_LE((pg - pg.transpose()).norm(), 1e-9);
    ASSERT_EQ(p.cycle_removal.size(), t.off_tree().size());
    for (const auto& pe : p.cycle_removal) {
      EXPECT_LE((pe * pe - pe).norm(), 1e-9);
      EXPECT_LE((pe - pe.transpose()).norm(), 1e-9);
      EXPECT_LE((pg * pe * pg - pg).norm(), 1e-9);
    }
  }
  const auto big = testing_support::random_connected_graph(60, 120, rng);
  EXPECT_EQ(capture([&] { build_projection_matrices(big, build_tree(big, TreeStrategy::kMinResistance)); }).code(),
            ErrorCode::kTooLarge);
}

TEST(Cli, SolveLapVerifies) {
  const auto r = cli({"solve-lap", sample("k3.graph"), sample("chi.vec"), "--eps", "0.01", "--seed", "7", "--verify",
                      "--report", "structured"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(field(r.out, "verify"), "pass");
  EXPECT_LE(std::stod(field(r.out, "gap")), 0.01 * std::stod(field(r.out, "energy")));
  for (const char* key : {"energy", "dual_energy", "gap", "iterations", "seed", "total_stretch", "tau", "residual_inf",
                          "wall_time"}) {
    EXPECT_FALSE(field(r.out, key).empty()) << key;
  }
}

TEST(Cli, InputErrorsExitOne) {
  EXPECT_EQ(cli({"solve-lap", sample("k3.graph"), "/nonexistent/chi.vec"}).code, kExitInputError);
  EXPECT_EQ(cli({"solve-lap", sample("k3.graph")}).code, kExitInputError);
  EXPECT_EQ(cli({"solve-lap", sample("k3.graph"), sample("chi.vec"), "--solver", "fast"}).code, kExitInputError);
  EXPECT_EQ(cli({"solve-lap", sample("k3.graph"), sample("chi.vec"), "--eps", "-1"}).code, kExitInputError);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitInputError);
  TempDir dir;
  const auto loop = dir.file("loop.graph", "p graph 2 1\n0 0 1\n");
  const auto r = cli({"tree-stats", loop});
  EXPECT_EQ(r.code, kExitInputError);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST(Cli, VerifyFailureExitsTwo) {
  // One update is far too few on a graph with many cycles.
  Engine rng(17);
  const auto g = testing_support::random_connected_graph(40, 160, rng);
  TempDir dir;
  const auto gp = dir.file("g.graph", emit_graph(g));
  const auto cp = dir.file("chi.vec", emit_vector(testing_support::random_demand(40, rng)));
  const auto r = cli({"solve-lap", gp, cp, "--verify", "--max-iter", "1", "--eps", "1e-6", "--report", "structured"});
  EXPECT_EQ(r.code, kExitVerifyFailed);
  EXPECT_EQ(field(r.out, "verify"), "fail");
}

TEST(Cli, TreeStats) {
  const auto r = cli({"tree-stats", sample("c4.graph"), "--tree", "mst", "--report", "structured"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(std::stod(field(r.out, "total_stretch")), 6.0);
  EXPECT_EQ(std::stod(field(r.out, "tau")), 4.0);
}

TEST(Cli, TreeFileRoundTrip) {
  TempDir dir;
  const auto tp = dir.file("c4.tree");
  ASSERT_EQ(cli({"tree-stats", sample("c4.graph"), "--tree", "mst", "--emit-tree", tp}).code, kExitOk);
  const auto r = cli({"tree-stats", sample("c4.graph"), "--tree", "file:" + tp, "--report", "structured"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(std::stod(field(r.out, "tau")), 4.0);
  const auto s = cli({"flow", sample("c4.graph"), sample("c4_chi.vec"), "--tree", "file:" + tp, "--verify"});
  EXPECT_EQ(s.code, kExitOk) << s.err;
}

TEST(Cli, SolveSddAndOutput) {
  TempDir dir;
  const auto xp = dir.file("x.vec");
  const auto r = cli({"solve-sdd", sample("sdd2.mtx"), sample("sdd2_b.vec"), "--eps", "1e-6", "--verify", "--out", xp});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto x = parse_vector(xp, 2);
  EXPECT_NEAR(x[0], 0.6, 1e-4);
  EXPECT_NEAR(x[1], -0.2, 1e-4);
}

TEST(Cli, VerifySubcommand) {
  const auto r = cli({"verify", sample("k3.graph"), sample("chi.vec"), "--trials", "5", "--report", "structured"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(field(r.out, "verify"), "pass");
  const auto s = cli({"verify", "--sdd", sample("sdd2.mtx"), sample("sdd2_b.vec"), "--trials", "3"});
  EXPECT_EQ(s.code, kExitOk) << s.err;
}

TEST(Cli, StructuredReportsAreDeterministic) {
  Engine rng(19);
  const auto g = testing_support::random_connected_graph(60, 180, rng);
  TempDir dir;
  const auto gp = dir.file("g.graph", emit_graph(g));
  const auto cp = dir.file("chi.vec", emit_vector(testing_support::random_demand(60, rng)));
  for (const char* solver : {"simple", "example", "full"}) {
    const std::vector<std::string> args{"flow", gp, cp, "--solver", solver, "--seed", "5", "--report", "structured"};
    auto strip = [](const std::string& text) {
      std::string out;
      std::istringstream in(text);
      for (std::string line; std::getline(in, line);) {
        if (line.rfind("wall_time ", 0) != 0) out += line + "\n";
      }
      return out;
    };
    const auto a = cli(args), b = cli(args);
    ASSERT_EQ(a.code, kExitOk) << a.err;
    EXPECT_EQ(strip(a.out), strip(b.out));
    EXPECT_NE(strip(a.out).find("iterations"), std::string::npos);
  }
}

TEST(Cli, HelpExitsZero) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("solve-sdd"), std::string::npos);
}

}  // namespace
