#pragma once

#include <span>

#include "canopyskel/geometry.hpp"

namespace canopyskel {

struct FitConfig {
  /// Clusters with fewer points fall back to a single line fit split into
  /// three equal segments.
  int min_points_full_fit = 8;
  /// Alternating re-projection passes after the initial parameterization.
  int max_parameter_corrections = 20;
  /// Radius used when PCA radius estimation is degenerate.
  double default_radius = 0.02;

  void validate() const;
};

/// Principal axes of a centered point set. `axes.col(0)` is PC1 (largest
/// variance); columns are unit length and form a right-handed basis.
struct PrincipalAxes {
  Point3 centroid = Point3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  Eigen::Vector3d variances = Eigen::Vector3d::Zero();  // descending
};

PrincipalAxes principal_axes(std::span<const Point3> points);

/// Half the extent of the points along their second principal component.
/// Throws GeometryError for fewer than 3 points or a rank < 2 point set.
double estimate_radius(std::span<const Point3> points);
double estimate_radius(const BranchCluster& cluster);

/// Least-squares fit of a degree-one B-spline with four control points
/// (clamped uniform knots, interior knots at 1/3 and 2/3).
///
/// Points are parameterized by normalized chord length along their PC1
/// ordering, then refined by alternating foot-point re-projection and
/// least-squares solves; an initialization from the PC1 projection is run
/// alongside and the lower-residual result wins. The chain is oriented so
/// control_points[0] has the smaller PC1 coordinate.
///
/// Throws GeometryError for fewer than 2 points or a zero-extent cluster.
SegmentChain fit_chain(const BranchCluster& cluster, const FitConfig& cfg = {});

/// Sum of squared distances from each point to the closest point of the chain.
double chain_residual(const SegmentChain& chain, std::span<const Point3> points);

}  // namespace canopyskel
