#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "sddflow/error.hpp"
#include "sddflow/graph.hpp"
#include "sddflow/sdd.hpp"
#include "sddflow/spanning_tree.hpp"

namespace sddflow {

namespace detail {

inline std::string at_line(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

inline std::vector<std::string_view> split_fields(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline double parse_real(std::string_view s, std::size_t line) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kParseError, at_line(line, "bad number '" + std::string(s) + "'"));
  }
  return v;
}

inline long long parse_integer(std::string_view s, std::size_t line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParseError, at_line(line, "bad integer '" + std::string(s) + "'"));
  }
  return v;
}

inline VertexId parse_vertex(std::string_view s, std::size_t line, long long n) {
  const auto v = parse_integer(s, line);
  if (v < 0 || v >= n) {
    throw Error(ErrorCode::kVertexOutOfRange, at_line(line, "vertex " + std::string(s) + " outside [0, " +
                                                                std::to_string(n) + ")"));
  }
  return static_cast<VertexId>(v);
}

// Shortest decimal that reads back to the same double.
inline std::string format_real(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "'");
  return in;
}

// Reads non-blank lines that do not start with `comment`.
class LineReader {
 public:
  LineReader(std::istream& in, char comment) : in_(in), comment_(comment) {}

  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, buffer_)) {
      ++line_;
      fields = split_fields(buffer_);
      if (fields.empty() || fields[0].front() == comment_) continue;
      return true;
    }
    return false;
  }

  const std::string& raw() const { return buffer_; }
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  char comment_;
  std::string buffer_;
  std::size_t line_ = 0;
};

struct MatrixMarketHeader {
  bool symmetric = false;
};

inline MatrixMarketHeader parse_mm_banner(std::string_view banner) {
  auto fields = split_fields(banner);
  std::vector<std::string> lower;
  for (auto f : fields) {
    std::string s(f);
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    lower.push_back(s);
  }
  if (lower.size() < 5 || lower[1] != "matrix" || lower[2] != "coordinate") {
    throw Error(ErrorCode::kParseError, at_line(1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'"));
  }
  if (lower[3] != "real" && lower[3] != "integer") {
    throw Error(ErrorCode::kParseError, at_line(1, "unsupported field '" + lower[3] + "'"));
  }
  if (lower[4] != "symmetric" && lower[4] != "general") {
    throw Error(ErrorCode::kParseError, at_line(1, "unsupported symmetry '" + lower[4] + "'"));
  }
  return {lower[4] == "symmetric"};
}

// Entries of a Matrix Market coordinate file (1-based in the file, 0-based
// here); symmetric files are expanded to both triangles.
inline SparseMatrix read_matrix_market(std::istream& in, std::string_view banner) {
  const auto header = parse_mm_banner(banner);
  LineReader reader(in, '%');
  std::vector<std::string_view> f;
  if (!reader.next(f)) throw Error(ErrorCode::kParseError, "missing size line");
  const std::size_t size_line = reader.line() + 1;
  if (f.size() != 3) throw Error(ErrorCode::kParseError, at_line(size_line, "expected '<rows> <cols> <entries>'"));
  const auto rows = parse_integer(f[0], size_line);
  const auto cols = parse_integer(f[1], size_line);
  const auto nnz = parse_integer(f[2], size_line);
  if (rows != cols || rows < 0 || nnz < 0) throw Error(ErrorCode::kParseError, at_line(size_line, "matrix must be square"));
  std::vector<MatrixEntry> entries;
  for (long long k = 0; k < nnz; ++k) {
    if (!reader.next(f)) throw Error(ErrorCode::kParseError, "expected " + std::to_string(nnz) + " entries");
    const std::size_t line = reader.line() + 1;
    if (f.size() != 3) throw Error(ErrorCode::kParseError, at_line(line, "expected '<row> <col> <value>'"));
    const auto i = static_cast<VertexId>(parse_vertex(f[0], line, rows + 1) - 1);
    const auto j = static_cast<VertexId>(parse_vertex(f[1], line, rows + 1) - 1);
    if (i < 0 || j < 0) throw Error(ErrorCode::kVertexOutOfRange, at_line(line, "indices are 1-based"));
    const double v = parse_real(f[2], line);
    entries.push_back({i, j, v});
    if (header.symmetric && i != j) entries.push_back({j, i, v});
  }
  if (reader.next(f)) throw Error(ErrorCode::kParseError, at_line(reader.line() + 1, "unexpected trailing entry"));
  return SparseMatrix(static_cast<VertexId>(rows), entries);
}

inline WeightedGraph graph_from_laplacian(const SparseMatrix& l) {
  const auto n = static_cast<std::size_t>(l.dimension());
  std::vector<double> diag(n, 0.0);
  std::vector<double> conductance_sum(n, 0.0);
  std::vector<RawEdge> edges;
  for (const auto& e : l.entries()) {
    if (e.row == e.col) {
      diag[static_cast<std::size_t>(e.row)] = e.value;
      continue;
    }
    if (e.value > 0.0) {
      throw Error(ErrorCode::kInconsistentLaplacian, "positive off-diagonal at (" + std::to_string(e.row + 1) + ", " +
                                                         std::to_string(e.col + 1) + ")");
    }
    if (l.at(e.col, e.row) != e.value) {
      throw Error(ErrorCode::kInconsistentLaplacian, "asymmetric entry at (" + std::to_string(e.row + 1) + ", " +
                                                         std::to_string(e.col + 1) + ")");
    }
    conductance_sum[static_cast<std::size_t>(e.row)] -= e.value;
    if (e.row < e.col) edges.push_back({e.row, e.col, -1.0 / e.value});
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(diag[i] - conductance_sum[i]) > 1e-9 * std::max(1.0, std::abs(diag[i]))) {
      throw Error(ErrorCode::kInconsistentLaplacian, "row " + std::to_string(i + 1) + " does not sum to zero");
    }
  }
  return build_graph(static_cast<VertexId>(n), edges);
}

inline WeightedGraph read_edge_list(std::istream& in) {
  LineReader reader(in, '#');
  std::vector<std::string_view> f;
  if (!reader.next(f)) throw Error(ErrorCode::kParseError, "empty graph file");
  if (f.size() != 4 || f[0] != "p" || f[1] != "graph") {
    throw Error(ErrorCode::kParseError, at_line(reader.line(), "expected header 'p graph <n> <m>'"));
  }
  const auto n = parse_integer(f[2], reader.line());
  const auto m = parse_integer(f[3], reader.line());
  if (n < 0 || m < 0 || n > std::numeric_limits<VertexId>::max()) {
    throw Error(ErrorCode::kParseError, at_line(reader.line(), "bad sizes"));
  }
  std::vector<RawEdge> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long long k = 0; k < m; ++k) {
    if (!reader.next(f)) throw Error(ErrorCode::kParseError, "expected " + std::to_string(m) + " edges, found " + std::to_string(k));
    const auto line = reader.line();
    if (f.size() != 3) throw Error(ErrorCode::kParseError, at_line(line, "expected '<a> <b> <resistance>'"));
    const auto a = parse_vertex(f[0], line, n);
    const auto b = parse_vertex(f[1], line, n);
    const double r = parse_real(f[2], line);
    if (a == b) throw Error(ErrorCode::kSelfLoop, at_line(line, "self-loop at vertex " + std::to_string(a)));
    if (!(r > 0.0)) throw Error(ErrorCode::kNonpositiveResistance, at_line(line, "resistance " + std::string(f[2])));
    edges.push_back({a, b, r});
  }
  if (reader.next(f)) throw Error(ErrorCode::kParseError, at_line(reader.line(), "more edges than the header declares"));
  return build_graph(static_cast<VertexId>(n), edges);
}

}  // namespace detail

// Edge list (`p graph <n> <m>` then `<a> <b> <resistance>` lines, `#`
// comments) or a Matrix Market Laplacian, chosen by the first line.
inline WeightedGraph parse_graph(std::istream& in) {
  std::string first;
  const auto start = in.tellg();
  std::getline(in, first);
  if (first.rfind("%%MatrixMarket", 0) == 0) {
    return detail::graph_from_laplacian(detail::read_matrix_market(in, first));
  }
  in.clear();
  in.seekg(start);
  return detail::read_edge_list(in);
}

inline WeightedGraph parse_graph(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_graph(in);
}

inline WeightedGraph parse_graph_text(const std::string& text) {
  std::istringstream in(text);
  return parse_graph(in);
}

inline std::string emit_graph(const WeightedGraph& g) {
  std::string out = "p graph " + std::to_string(g.num_vertices()) + " " + std::to_string(g.num_edges()) + "\n";
  for (const auto& e : g.edges()) {
    out += std::to_string(e.tail) + " " + std::to_string(e.head) + " " + detail::format_real(e.resistance) + "\n";
  }
  return out;
}

inline SparseMatrix parse_matrix(std::istream& in) {
  std::string first;
  std::getline(in, first);
  if (first.rfind("%%MatrixMarket", 0) != 0) throw Error(ErrorCode::kParseError, detail::at_line(1, "expected a Matrix Market banner"));
  return detail::read_matrix_market(in, first);
}

inline SparseMatrix parse_matrix(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_matrix(in);
}

inline std::string emit_matrix(const SparseMatrix& a) {
  std::string out = "%%MatrixMarket matrix coordinate real general\n";
  out += std::to_string(a.dimension()) + " " + std::to_string(a.dimension()) + " " + std::to_string(a.entries().size()) + "\n";
  for (const auto& e : a.entries()) {
    out += std::to_string(e.row + 1) + " " + std::to_string(e.col + 1) + " " + detail::format_real(e.value) + "\n";
  }
  return out;
}

enum class VectorKind { kPlain, kDemand };

// One value per line (blank and `#` lines skipped), exactly n values.
inline std::vector<double> parse_vector(std::istream& in, std::size_t n, VectorKind kind = VectorKind::kPlain) {
  detail::LineReader reader(in, '#');
  std::vector<std::string_view> f;
  std::vector<double> out;
  while (reader.next(f)) {
    if (f.size() != 1) throw Error(ErrorCode::kParseError, detail::at_line(reader.line(), "expected one value"));
    out.push_back(detail::parse_real(f[0], reader.line()));
  }
  if (out.size() != n) {
    throw Error(ErrorCode::kLengthMismatch, "expected " + std::to_string(n) + " values, found " + std::to_string(out.size()));
  }
  if (kind == VectorKind::kDemand) detail::require_balanced(out, detail::balance_tolerance(out));
  return out;
}

inline std::vector<double> parse_vector(const std::string& path, std::size_t n, VectorKind kind = VectorKind::kPlain) {
  auto in = detail::open_input(path);
  return parse_vector(in, n, kind);
}

inline std::string emit_vector(std::span<const double> x) {
  std::string out;
  for (double v : x) out += detail::format_real(v) + "\n";
  return out;
}

// Tree file: optional `p tree <n> <root>` header, then one line per vertex v
// (in id order) `<parent> <sign>`, where sign is +1 when the graph edge
// {parent, v} is oriented parent -> v, -1 when reversed, and the root's line
// is `<root> 0`.
struct TreeSpec {
  std::vector<EdgeId> edges;
  VertexId root = 0;
};

inline TreeSpec parse_tree(std::istream& in, const WeightedGraph& g) {
  detail::LineReader reader(in, '#');
  std::vector<std::string_view> f;
  TreeSpec spec;
  std::unordered_map<std::uint64_t, EdgeId> lookup;
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    const auto& edge = g.edge(e);
    lookup[(static_cast<std::uint64_t>(edge.tail) << 32) | static_cast<std::uint32_t>(edge.head)] = e;
  }
  const VertexId n = g.num_vertices();
  std::optional<VertexId> header_root;
  std::optional<VertexId> root;
  VertexId v = 0;
  bool first = true;
  while (reader.next(f)) {
    const auto line = reader.line();
    if (first && f[0] == "p") {
      first = false;
      if (f.size() != 4 || f[1] != "tree") throw Error(ErrorCode::kParseError, detail::at_line(line, "expected 'p tree <n> <root>'"));
      if (detail::parse_integer(f[2], line) != n) {
        throw Error(ErrorCode::kLengthMismatch, detail::at_line(line, "tree vertex count differs from graph"));
      }
      header_root = detail::parse_vertex(f[3], line, n);
      continue;
    }
    first = false;
    if (v >= n) throw Error(ErrorCode::kLengthMismatch, detail::at_line(line, "more lines than vertices"));
    if (f.size() != 2) throw Error(ErrorCode::kParseError, detail::at_line(line, "expected '<parent> <sign>'"));
    const auto p = detail::parse_vertex(f[0], line, n);
    const auto sign = detail::parse_integer(f[1], line);
    if (p == v) {
      if (sign != 0 || root) throw Error(ErrorCode::kInvalidTreeEdges, detail::at_line(line, "bad root line"));
      root = v;
    } else {
      if (sign != 1 && sign != -1) throw Error(ErrorCode::kParseError, detail::at_line(line, "sign must be 1 or -1"));
      const VertexId tail = sign == 1 ? p : v;
      const VertexId head = sign == 1 ? v : p;
      const auto it = lookup.find((static_cast<std::uint64_t>(tail) << 32) | static_cast<std::uint32_t>(head));
      if (it == lookup.end()) {
        throw Error(ErrorCode::kInvalidTreeEdges, detail::at_line(line, "no graph edge " + std::to_string(tail) + " -> " +
                                                                            std::to_string(head)));
      }
      spec.edges.push_back(it->second);
    }
    ++v;
  }
  if (v != n) throw Error(ErrorCode::kLengthMismatch, "expected " + std::to_string(n) + " tree lines, found " + std::to_string(v));
  if (!root) throw Error(ErrorCode::kInvalidTreeEdges, "no root line");
  if (header_root && *header_root != *root) throw Error(ErrorCode::kInvalidTreeEdges, "header root differs from root line");
  spec.root = *root;
  return spec;
}

inline TreeSpec parse_tree(const std::string& path, const WeightedGraph& g) {
  auto in = detail::open_input(path);
  return parse_tree(in, g);
}

inline std::string emit_tree(const SpanningTree& t) {
  std::string out = "p tree " + std::to_string(t.num_vertices()) + " " + std::to_string(t.root()) + "\n";
  for (VertexId v = 0; v < t.num_vertices(); ++v) {
    out += std::to_string(t.parent(v)) + " " + std::to_string(t.parent_sign(v)) + "\n";
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path + "'");
}

}  // namespace sddflow
