#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace canopyskel {

/// 3D position in meters.
using Point3 = Eigen::Vector3d;

/// Raised when an input violates a geometric precondition (zero-length
/// segment, empty point set, non-finite coordinate, ...).
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

bool is_finite(const Point3& p);

/// One segmented branch instance: the points of a single visible branch
/// and the detector's confidence for it.
struct BranchCluster {
  std::vector<Point3> points;
  double confidence = 1.0;
  int cluster_id = 0;
  int view_id = 0;

  /// Throws GeometryError when points are empty/non-finite or the
  /// confidence is outside (0, 1].
  void validate() const;
};

struct LineSegment {
  Point3 a = Point3::Zero();
  Point3 b = Point3::Zero();
  double confidence = 1.0;
  double radius = 0.0;

  double length() const { return (b - a).norm(); }
  Point3 direction() const { return (b - a).normalized(); }
};

/// Degree-one B-spline with four control points, stored both as control
/// points and as the three line segments they span.
struct SegmentChain {
  std::array<Point3, 4> control_points;
  std::array<LineSegment, 3> segments;
  double radius = 0.0;
  double confidence = 1.0;

  static SegmentChain from_control_points(const std::array<Point3, 4>& cps, double radius,
                                          double confidence);
};

enum class Provenance : std::uint8_t { Observed, PathDerived };

struct SkeletonVertex {
  Point3 position = Point3::Zero();
  double radius = 0.0;
  Provenance provenance = Provenance::Observed;
};

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected vertex/edge graph. Edges are stored normalized (first < second);
/// self loops and duplicates are rejected on insertion.
class SkeletonGraph {
 public:
  SkeletonGraph() = default;
  explicit SkeletonGraph(std::vector<SkeletonVertex> vertices) : vertices_(std::move(vertices)) {}

  std::size_t add_vertex(const SkeletonVertex& v);
  /// Returns false (and leaves the graph untouched) for self loops and
  /// duplicate edges. Throws std::out_of_range on bad indices.
  bool add_edge(std::size_t u, std::size_t v);
  bool has_edge(std::size_t u, std::size_t v) const;

  const std::vector<SkeletonVertex>& vertices() const { return vertices_; }
  std::vector<SkeletonVertex>& vertices() { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  std::vector<std::vector<std::size_t>> adjacency() const;
  std::vector<std::size_t> degrees() const;

  /// Component label per vertex, labels numbered 0..count-1 in order of the
  /// smallest vertex index of each component.
  std::vector<std::size_t> component_labels() const;
  std::size_t component_count() const;
  bool is_acyclic() const;

 private:
  std::vector<SkeletonVertex> vertices_;
  std::vector<Edge> edges_;
  std::unordered_set<std::uint64_t> edge_keys_;
};

/// Disjoint-set forest with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n);
  std::size_t find(std::size_t x);
  /// Returns false when x and y were already in the same set.
  bool unite(std::size_t x, std::size_t y);
  std::size_t set_count() const { return sets_; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
  std::size_t sets_;
};

struct AxialRadial {
  double axial = 0.0;
  double radial = 0.0;
};

/// Axial overshoot past the nearest endpoint (zero while the projection
/// falls inside the segment) and perpendicular distance to the segment's
/// supporting line.
AxialRadial point_segment_distances(const Point3& p, const LineSegment& s);

/// Closest distance from p to the closed segment [a, b].
double point_to_segment_distance(const Point3& p, const Point3& a, const Point3& b);

/// Exact Euclidean minimum spanning tree. Ties in edge length are resolved in
/// favour of the lexicographically smaller (u, v) pair, which makes the tree
/// unique. Returned edges are normalized (u < v) and sorted.
std::vector<Edge> euclidean_mst(std::span<const Point3> points);

}  // namespace canopyskel
