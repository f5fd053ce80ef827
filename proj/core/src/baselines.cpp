#include "canopyskel/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace canopyskel {

void FtsemConfig::validate() const {
  if (!(max_connect_distance > 0.0)) throw std::invalid_argument("ftsem max_connect_distance must be > 0");
  if (!(max_angle_deg > 0.0 && max_angle_deg < 180.0)) {
    throw std::invalid_argument("ftsem max_angle_deg must be in (0, 180)");
  }
  if (endpoint_direction_window < 2) {
    throw std::invalid_argument("ftsem endpoint_direction_window must be >= 2");
  }
}

SkeletonGraph mst_baseline(std::vector<SkeletonVertex> vertices) {
  if (vertices.empty()) throw GeometryError("mst_baseline: no vertices");
  SkeletonGraph graph(std::move(vertices));
  std::vector<Point3> pts;
  pts.reserve(graph.vertex_count());
  for (const auto& v : graph.vertices()) pts.push_back(v.position);
  for (const auto& [u, v] : euclidean_mst(pts)) graph.add_edge(u, v);
  return graph;
}

Point3 breakpoint_direction(const SkeletonGraph& graph,
                            const std::vector<std::vector<std::size_t>>& adjacency,
                            std::size_t endpoint, int window) {
  Point3 sum = Point3::Zero();
  std::size_t prev = endpoint;
  std::size_t cur = endpoint;
  for (int step = 1; step < window; ++step) {
    // Walk inward along the smallest-index neighbour not yet visited.
    std::size_t next = cur;
    for (auto n : adjacency[cur]) {
      if (n != prev) {
        next = n;
        break;
      }
    }
    if (next == cur) break;
    const Point3 d = graph.vertices()[cur].position - graph.vertices()[next].position;
    if (d.norm() > 0.0) sum += d.normalized();
    prev = cur;
    cur = next;
  }
  return sum.norm() > 0.0 ? Point3(sum.normalized()) : Point3(Point3::Zero());
}

namespace {

double angle_deg(const Point3& a, const Point3& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) return 180.0;
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace

SkeletonGraph ftsem_baseline(SkeletonGraph forest, const FtsemConfig& cfg,
                             std::vector<BreakpointLink>* links) {
  cfg.validate();
  if (!forest.is_acyclic()) throw GeometryError("ftsem_baseline: input is not a forest");
  const auto adjacency = forest.adjacency();
  const auto labels = forest.component_labels();

  std::vector<std::size_t> breakpoints;
  std::vector<Point3> directions;
  for (std::size_t i = 0; i < forest.vertex_count(); ++i) {
    if (adjacency[i].size() != 1) continue;
    breakpoints.push_back(i);
    directions.push_back(breakpoint_direction(forest, adjacency, i, cfg.endpoint_direction_window));
  }

  std::vector<BreakpointLink> candidates;
  for (std::size_t x = 0; x < breakpoints.size(); ++x) {
    for (std::size_t y = x + 1; y < breakpoints.size(); ++y) {
      const std::size_t a = breakpoints[x];
      const std::size_t b = breakpoints[y];
      if (labels[a] == labels[b]) continue;
      const Point3 gap = forest.vertices()[b].position - forest.vertices()[a].position;
      const double dist = gap.norm();
      if (dist > cfg.max_connect_distance) continue;
      const double ang_a = angle_deg(directions[x], gap);
      const double ang_b = angle_deg(directions[y], -gap);
      if (ang_a > cfg.max_angle_deg || ang_b > cfg.max_angle_deg) continue;
      candidates.push_back({a, b, dist, ang_a, ang_b});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& l, const auto& r) {
    return std::tie(l.distance, l.a, l.b) < std::tie(r.distance, r.a, r.b);
  });

  UnionFind sets(forest.vertex_count());
  for (const auto& [u, v] : forest.edges()) sets.unite(u, v);
  std::vector<char> used(forest.vertex_count(), 0);
  for (const auto& c : candidates) {
    if (used[c.a] || used[c.b]) continue;
    if (!sets.unite(c.a, c.b)) continue;
    used[c.a] = used[c.b] = 1;
    forest.add_edge(c.a, c.b);
    if (links) links->push_back(c);
  }
  return forest;
}

SkeletonGraph render_bridges(const SkeletonGraph& graph, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("render_bridges: spacing must be > 0");
  SkeletonGraph out(graph.vertices());
  const double limit = spacing * (1.0 + 1e-9);
  for (const auto& [u, v] : graph.edges()) {
    const SkeletonVertex a = graph.vertices()[u];
    const SkeletonVertex b = graph.vertices()[v];
    const double len = (b.position - a.position).norm();
    if (!(len > limit)) {
      out.add_edge(u, v);
      continue;
    }
    const auto pieces = static_cast<std::size_t>(std::ceil(len / spacing - 1e-9));
    std::size_t prev = u;
    for (std::size_t k = 1; k < pieces; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(pieces);
      SkeletonVertex mid;
      mid.position = a.position + t * (b.position - a.position);
      mid.radius = a.radius + t * (b.radius - a.radius);
      mid.provenance = Provenance::PathDerived;
      const std::size_t id = out.add_vertex(mid);
      out.add_edge(prev, id);
      prev = id;
    }
    out.add_edge(prev, v);
  }
  return out;
}

}  // namespace canopyskel
