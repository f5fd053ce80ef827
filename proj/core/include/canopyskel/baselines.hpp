#pragma once

#include <vector>

#include "canopyskel/geometry.hpp"

namespace canopyskel {

struct FtsemConfig {
  double max_connect_distance = 0.10;
  double max_angle_deg = 30.0;
  /// Vertices walked inward from a breakpoint to estimate its direction.
  int endpoint_direction_window = 5;

  void validate() const;
};

/// Full Euclidean MST over the vertices; no edge removal.
SkeletonGraph mst_baseline(std::vector<SkeletonVertex> vertices);

/// Outward growth direction of breakpoint `endpoint`: mean of the unit edge
/// directions along the first `window` vertices walked inward. Zero when the
/// vertex has no neighbour.
Point3 breakpoint_direction(const SkeletonGraph& graph,
                            const std::vector<std::vector<std::size_t>>& adjacency,
                            std::size_t endpoint, int window);

/// A straight edge added by the breakpoint connection rule.
struct BreakpointLink {
  std::size_t a = 0;
  std::size_t b = 0;
  double distance = 0.0;
  double angle_a_deg = 0.0;
  double angle_b_deg = 0.0;
};

/// Joins degree-one breakpoints of different subgraphs whose gap and both
/// direction angles fall within the thresholds, shortest candidates first,
/// never closing a cycle. `links` (optional) receives the accepted edges.
SkeletonGraph ftsem_baseline(SkeletonGraph forest, const FtsemConfig& cfg = {},
                             std::vector<BreakpointLink>* links = nullptr);

/// Splits every edge longer than `spacing` into equal pieces no longer than
/// `spacing`. Inserted vertices are PathDerived with radii interpolated
/// between the edge's endpoints; original vertices keep their indices.
/// This puts straight bridges on the same footing as voxel paths.
SkeletonGraph render_bridges(const SkeletonGraph& graph, double spacing);

}  // namespace canopyskel
