#include "canopyskel/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace canopyskel {

namespace {

std::string where(std::size_t line, const std::string& source) {
  return source.empty() ? fmt::format("line {}: ", line) : fmt::format("{}:{}: ", source, line);
}

bool finite_point(const Point3& p) { return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z()); }

/// Parses a whole line as exactly the given fields; trailing tokens fail.
template <typename... T>
bool parse_fields(const std::string& line, T&... out) {
  std::istringstream ss(line);
  if (!(ss >> ... >> out)) return false;
  std::string rest;
  return !(ss >> rest);
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& message, const std::string& source)
    : std::runtime_error(where(line, source) + message), line_(line), message_(message) {}

bool LineReader::next(std::string& line) {
  while (std::getline(is_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

void write_clusters(std::ostream& os, std::span<const BranchCluster> clusters) {
  for (const auto& c : clusters) {
    fmt::print(os, "cluster {} {} {}\n", c.cluster_id, c.confidence, c.points.size());
    for (const auto& p : c.points) fmt::print(os, "{} {} {}\n", p.x(), p.y(), p.z());
  }
}

std::vector<BranchCluster> read_clusters(std::istream& is) {
  LineReader reader(is);
  std::vector<BranchCluster> clusters;
  std::string line;
  while (reader.next(line)) {
    std::string tag;
    BranchCluster c;
    long long n = 0;
    if (!parse_fields(line, tag, c.cluster_id, c.confidence, n) || tag != "cluster" || n < 0) {
      throw ParseError(reader.line_number(), "expected 'cluster <id> <confidence> <n>'");
    }
    if (!(c.confidence > 0.0 && c.confidence <= 1.0)) {
      throw ParseError(reader.line_number(), "cluster confidence must be in (0, 1]");
    }
    c.points.reserve(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) {
      if (!reader.next(line)) throw ParseError(reader.line_number(), "truncated cluster");
      Point3 p;
      if (!parse_fields(line, p.x(), p.y(), p.z()) || !finite_point(p)) {
        throw ParseError(reader.line_number(), "expected 'x y z'");
      }
      c.points.push_back(p);
    }
    clusters.push_back(std::move(c));
  }
  return clusters;
}

// ---------------------------------------------------------------------------

void write_skeleton(std::ostream& os, const SkeletonGraph& graph) {
  fmt::print(os, "skeleton {} {}\n", graph.vertex_count(), graph.edge_count());
  const auto& vs = graph.vertices();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const auto& v = vs[i];
    fmt::print(os, "{} {} {} {} {} {}\n", i, v.position.x(), v.position.y(), v.position.z(), v.radius,
               v.provenance == Provenance::PathDerived ? "path" : "obs");
  }
  for (const auto& [u, v] : graph.edges()) fmt::print(os, "{} {}\n", u, v);
}

SkeletonGraph read_skeleton(std::istream& is) {
  LineReader reader(is);
  std::string line;
  std::string tag;
  long long nv = 0;
  long long ne = 0;
  if (!reader.next(line) || !parse_fields(line, tag, nv, ne) || tag != "skeleton" || nv < 0 || ne < 0) {
    throw ParseError(reader.line_number(), "expected 'skeleton <n_vertices> <n_edges>'");
  }
  SkeletonGraph graph;
  for (long long i = 0; i < nv; ++i) {
    if (!reader.next(line)) throw ParseError(reader.line_number(), "truncated vertex list");
    long long id = 0;
    SkeletonVertex v;
    std::string prov;
    if (!parse_fields(line, id, v.position.x(), v.position.y(), v.position.z(), v.radius, prov)) {
      throw ParseError(reader.line_number(), "expected 'id x y z radius provenance'");
    }
    if (id != i) throw ParseError(reader.line_number(), fmt::format("expected vertex id {}", i));
    if (!finite_point(v.position) || !std::isfinite(v.radius) || v.radius < 0.0) {
      throw ParseError(reader.line_number(), "non-finite position or negative radius");
    }
    if (prov == "obs") {
      v.provenance = Provenance::Observed;
    } else if (prov == "path") {
      v.provenance = Provenance::PathDerived;
    } else {
      throw ParseError(reader.line_number(), "provenance must be 'obs' or 'path'");
    }
    graph.add_vertex(v);
  }
  for (long long i = 0; i < ne; ++i) {
    if (!reader.next(line)) throw ParseError(reader.line_number(), "truncated edge list");
    long long u = 0;
    long long v = 0;
    if (!parse_fields(line, u, v) || u < 0 || v < 0 || u >= nv || v >= nv) {
      throw ParseError(reader.line_number(), "expected 'u v' with valid vertex ids");
    }
    if (!graph.add_edge(static_cast<std::size_t>(u), static_cast<std::size_t>(v))) {
      throw ParseError(reader.line_number(), "self loop or duplicate edge");
    }
  }
  if (reader.next(line)) throw ParseError(reader.line_number(), "trailing content after edge list");
  return graph;
}

// ---------------------------------------------------------------------------

void write_mask(std::ostream& os, const std::vector<bool>& mask) {
  fmt::print(os, "mask {}\n", mask.size());
  for (bool b : mask) os << (b ? "1\n" : "0\n");
}

std::vector<bool> read_mask(std::istream& is) {
  LineReader reader(is);
  std::string line;
  std::string tag;
  long long n = 0;
  if (!reader.next(line) || !parse_fields(line, tag, n) || tag != "mask" || n < 0) {
    throw ParseError(reader.line_number(), "expected 'mask <n>'");
  }
  std::vector<bool> mask;
  mask.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    int b = 0;
    if (!reader.next(line) || !parse_fields(line, b) || (b != 0 && b != 1)) {
      throw ParseError(reader.line_number(), "expected 0 or 1");
    }
    mask.push_back(b == 1);
  }
  if (reader.next(line)) throw ParseError(reader.line_number(), "trailing content after mask");
  return mask;
}

void write_volume(std::ostream& os, const SkeletonGraph& graph) {
  fmt::print(os, "volume {}\n", graph.vertex_count());
  for (const auto& v : graph.vertices()) {
    fmt::print(os, "{} {} {} {}\n", v.position.x(), v.position.y(), v.position.z(), v.radius);
  }
}

// ---------------------------------------------------------------------------

void write_ply(std::ostream& os, std::span<const BranchCluster> clusters) {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.points.size();
  fmt::print(os,
             "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\n"
             "property double z\nproperty int cluster\nproperty double confidence\nend_header\n",
             n);
  for (const auto& c : clusters) {
    for (const auto& p : c.points) {
      fmt::print(os, "{} {} {} {} {}\n", p.x(), p.y(), p.z(), c.cluster_id, c.confidence);
    }
  }
}

std::vector<BranchCluster> read_ply(std::istream& is) {
  LineReader reader(is);
  std::string line;
  if (!reader.next(line) || line != "ply") throw ParseError(reader.line_number(), "missing 'ply' magic");
  long long n_vertices = -1;
  std::vector<std::string> props;
  bool in_vertex = false;
  bool vertex_seen = false;
  long long skip_before = 0;  // rows of elements declared before "vertex"
  while (true) {
    if (!reader.next(line)) throw ParseError(reader.line_number(), "missing end_header");
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "end_header") break;
    if (word == "format") {
      std::string fmt_name;
      ss >> fmt_name;
      if (fmt_name != "ascii") throw ParseError(reader.line_number(), "only ASCII PLY is supported");
    } else if (word == "element") {
      std::string name;
      long long count = 0;
      if (!(ss >> name >> count) || count < 0) throw ParseError(reader.line_number(), "malformed element");
      in_vertex = name == "vertex";
      if (in_vertex) {
        n_vertices = count;
        vertex_seen = true;
      } else if (!vertex_seen) {
        skip_before += count;
      }
    } else if (word == "property") {
      std::string type;
      std::string name;
      ss >> type;
      if (type == "list") {
        if (in_vertex) throw ParseError(reader.line_number(), "list properties on vertices are not supported");
        continue;
      }
      if (!(ss >> name)) throw ParseError(reader.line_number(), "malformed property");
      if (in_vertex) props.push_back(name);
    } else if (word != "comment" && word != "obj_info") {
      throw ParseError(reader.line_number(), "unexpected header line");
    }
  }
  if (n_vertices < 0) throw ParseError(reader.line_number(), "no vertex element");
  const auto col = [&](const char* name) -> long {
    const auto it = std::find(props.begin(), props.end(), name);
    return it == props.end() ? -1 : static_cast<long>(it - props.begin());
  };
  const long cx = col("x");
  const long cy = col("y");
  const long cz = col("z");
  const long ccl = col("cluster");
  const long cconf = col("confidence");
  if (cx < 0 || cy < 0 || cz < 0) throw ParseError(reader.line_number(), "vertex lacks x/y/z");

  for (long long i = 0; i < skip_before; ++i) {
    if (!reader.next(line)) throw ParseError(reader.line_number(), "truncated element data");
  }
  std::map<int, BranchCluster> by_id;
  for (long long i = 0; i < n_vertices; ++i) {
    if (!reader.next(line)) throw ParseError(reader.line_number(), "truncated vertex data");
    std::istringstream ss(line);
    std::vector<double> vals{std::istream_iterator<double>(ss), std::istream_iterator<double>()};
    if (vals.size() != props.size()) throw ParseError(reader.line_number(), "vertex row width mismatch");
    const Point3 p(vals[static_cast<std::size_t>(cx)], vals[static_cast<std::size_t>(cy)],
                   vals[static_cast<std::size_t>(cz)]);
    if (!finite_point(p)) throw ParseError(reader.line_number(), "non-finite coordinate");
    const int id = ccl >= 0 ? static_cast<int>(vals[static_cast<std::size_t>(ccl)]) : 0;
    auto& c = by_id[id];
    c.cluster_id = id;
    c.confidence = cconf >= 0 ? vals[static_cast<std::size_t>(cconf)] : 1.0;
    if (!(c.confidence > 0.0 && c.confidence <= 1.0)) {
      throw ParseError(reader.line_number(), "confidence must be in (0, 1]");
    }
    c.points.push_back(p);
  }
  std::vector<BranchCluster> out;
  for (auto& [id, c] : by_id) out.push_back(std::move(c));
  return out;
}

// ---------------------------------------------------------------------------

void write_file(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace canopyskel
