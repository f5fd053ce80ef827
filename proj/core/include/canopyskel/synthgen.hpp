#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "canopyskel/geometry.hpp"

namespace canopyskel {

struct TreeGenParams {
  std::uint64_t rng_seed = 1;
  std::string species = "generic";
  int depth = 4;
  int children_min = 2;
  int children_max = 4;
  double branch_length_decay = 0.7;
  double branch_radius_decay = 0.6;
  double trunk_length = 1.0;
  double trunk_radius = 0.05;
  double branching_angle_min_deg = 20.0;
  double branching_angle_max_deg = 60.0;
  /// Children attach between this fraction of the parent's length and its tip.
  double attach_min_fraction = 0.35;
  /// Maximum accumulated bend along one branch.
  double max_bend_deg = 10.0;
  double sample_spacing = 0.01;

  void validate() const;
  /// Presets loosely mimicking oak (wide, bushy), apple (short trunk,
  /// spreading) and walnut (tall, upright). Unknown names throw.
  static TreeGenParams preset(const std::string& species, std::uint64_t seed);
};

/// One generated branch: vertex ids from its base (shared with the parent,
/// except for the trunk) to its tip.
struct GeneratedBranch {
  std::vector<std::size_t> vertices;
  int level = 0;
  int parent = -1;
  double radius = 0.0;
};

struct GroundTruthSkeleton {
  SkeletonGraph graph;
  std::vector<GeneratedBranch> branches;
};

GroundTruthSkeleton generate_tree(const TreeGenParams& params);

struct Sphere {
  Point3 center = Point3::Zero();
  double radius = 0.0;
};

struct OcclusionParams {
  /// Seeds surface sampling, noise and confidences.
  std::uint64_t rng_seed = 1;
  /// Seeds occluder placement. Occluders are drawn one after another from
  /// this stream, so a shared seed nests the sets of increasing levels.
  std::uint64_t occluder_seed = 1;
  int foliage_density_level = 1;
  /// Overrides the density-derived occluder count when set.
  std::optional<int> occluder_count;
  /// Occluders per cubic metre of crown bounding box (all branches but the
  /// trunk), per density level.
  double occluders_per_m3_per_level = 15.0;
  double occluder_radius_min = 0.05;
  double occluder_radius_max = 0.20;
  double surface_point_density = 10000.0;
  double point_noise_sigma = 0.002;
  double confidence_min = 0.6;
  double confidence_max = 0.99;
  double max_cluster_length = 0.25;
  int min_cluster_points = 10;
  /// Virtual viewpoints spread horizontally in front of the tree; a surface
  /// point is kept when it faces at least one of them.
  int viewpoint_count = 3;
  double viewpoint_spread_deg = 120.0;

  void validate() const;
};

struct Observations {
  std::vector<BranchCluster> clusters;
  /// One flag per ground-truth vertex: true when no emitted cluster carries
  /// points from the centreline intervals next to it.
  std::vector<bool> occluded_mask;
  std::vector<Sphere> occluders;
};

/// Number of occluders the density level calls for on this tree.
int derived_occluder_count(const GroundTruthSkeleton& gt, const OcclusionParams& params);

/// Samples one-sided branch surfaces, carves out spherical occluders, splits
/// the survivors into slender per-branch clusters and scores them.
/// `extra_occluders` are carved in addition to the randomly placed ones.
Observations simulate_observations(const GroundTruthSkeleton& gt, const OcclusionParams& params,
                                   std::span<const Sphere> extra_occluders = {});

}  // namespace canopyskel
