#include "canopyskel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace canopyskel {

bool is_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

void BranchCluster::validate() const {
  if (points.empty()) {
    throw GeometryError("branch cluster " + std::to_string(cluster_id) + " has no points");
  }
  if (!(confidence > 0.0 && confidence <= 1.0)) {
    throw GeometryError("branch cluster " + std::to_string(cluster_id) +
                        " confidence outside (0, 1]");
  }
  for (const auto& p : points) {
    if (!is_finite(p)) {
      throw GeometryError("branch cluster " + std::to_string(cluster_id) +
                          " contains a non-finite point");
    }
  }
}

SegmentChain SegmentChain::from_control_points(const std::array<Point3, 4>& cps, double radius,
                                               double confidence) {
  SegmentChain chain;
  chain.control_points = cps;
  chain.radius = radius;
  chain.confidence = confidence;
  for (std::size_t i = 0; i < 3; ++i) {
    chain.segments[i] = LineSegment{cps[i], cps[i + 1], confidence, radius};
  }
  return chain;
}

// ---------------------------------------------------------------------------
// SkeletonGraph

namespace {
std::uint64_t edge_key(std::size_t u, std::size_t v) {
  const auto lo = static_cast<std::uint64_t>(std::min(u, v));
  const auto hi = static_cast<std::uint64_t>(std::max(u, v));
  return (hi << 32) | lo;
}
}  // namespace

std::size_t SkeletonGraph::add_vertex(const SkeletonVertex& v) {
  vertices_.push_back(v);
  return vertices_.size() - 1;
}

bool SkeletonGraph::add_edge(std::size_t u, std::size_t v) {
  if (u >= vertices_.size() || v >= vertices_.size()) {
    throw std::out_of_range("edge references a vertex that does not exist");
  }
  if (u == v) return false;
  if (!edge_keys_.insert(edge_key(u, v)).second) return false;
  edges_.emplace_back(std::min(u, v), std::max(u, v));
  return true;
}

bool SkeletonGraph::has_edge(std::size_t u, std::size_t v) const {
  return edge_keys_.contains(edge_key(u, v));
}

std::vector<std::vector<std::size_t>> SkeletonGraph::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(vertices_.size());
  for (const auto& [u, v] : edges_) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

std::vector<std::size_t> SkeletonGraph::degrees() const {
  std::vector<std::size_t> deg(vertices_.size(), 0);
  for (const auto& [u, v] : edges_) {
    ++deg[u];
    ++deg[v];
  }
  return deg;
}

std::vector<std::size_t> SkeletonGraph::component_labels() const {
  UnionFind uf(vertices_.size());
  for (const auto& [u, v] : edges_) uf.unite(u, v);
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> root_label(vertices_.size(), kUnset);
  std::vector<std::size_t> labels(vertices_.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const auto r = uf.find(i);
    if (root_label[r] == kUnset) root_label[r] = next++;
    labels[i] = root_label[r];
  }
  return labels;
}

std::size_t SkeletonGraph::component_count() const {
  UnionFind uf(vertices_.size());
  for (const auto& [u, v] : edges_) uf.unite(u, v);
  return uf.set_count();
}

bool SkeletonGraph::is_acyclic() const {
  UnionFind uf(vertices_.size());
  for (const auto& [u, v] : edges_) {
    if (!uf.unite(u, v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// UnionFind

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1), sets_(n) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool UnionFind::unite(std::size_t x, std::size_t y) {
  x = find(x);
  y = find(y);
  if (x == y) return false;
  if (size_[x] < size_[y]) std::swap(x, y);
  parent_[y] = x;
  size_[x] += size_[y];
  --sets_;
  return true;
}

// ---------------------------------------------------------------------------
// Distances

AxialRadial point_segment_distances(const Point3& p, const LineSegment& s) {
  const Point3 axis = s.b - s.a;
  const double len = axis.norm();
  if (!(len > 0.0) || !std::isfinite(len)) {
    throw GeometryError("degenerate line segment (zero length)");
  }
  const Point3 unit = axis / len;
  const Point3 rel = p - s.a;
  const double t = rel.dot(unit);
  const double half = 0.5 * len;
  AxialRadial d;
  d.axial = std::max(0.0, std::abs(t - half) - half);
  d.radial = (rel - t * unit).norm();
  return d;
}

double point_to_segment_distance(const Point3& p, const Point3& a, const Point3& b) {
  const Point3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// ---------------------------------------------------------------------------
// Euclidean MST (dense Prim). Keys compare (squared length, u, v)
// lexicographically, a strict total order on edges, so the tree is the same
// one Kruskal with lexicographic tie-breaking would produce.

std::vector<Edge> euclidean_mst(std::span<const Point3> points) {
  if (points.empty()) throw GeometryError("euclidean_mst: empty point set");
  const std::size_t n = points.size();
  for (const auto& p : points) {
    if (!is_finite(p)) throw GeometryError("euclidean_mst: non-finite point");
  }

  using Key = std::tuple<double, std::size_t, std::size_t>;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<Key> best(n, Key{kInf, n, n});
  std::vector<std::size_t> parent(n, n);
  std::vector<char> in_tree(n, 0);

  std::vector<Edge> edges;
  edges.reserve(n - 1);

  std::size_t current = 0;
  in_tree[0] = 1;
  for (std::size_t step = 1; step < n; ++step) {
    const Point3& pc = points[current];
    std::size_t pick = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const Key cand{(points[j] - pc).squaredNorm(), std::min(current, j), std::max(current, j)};
      if (cand < best[j]) {
        best[j] = cand;
        parent[j] = current;
      }
      if (pick == n || best[j] < best[pick]) pick = j;
    }
    in_tree[pick] = 1;
    edges.emplace_back(std::min(pick, parent[pick]), std::max(pick, parent[pick]));
    current = pick;
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace canopyskel
