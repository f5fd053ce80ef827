#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "canopyskel/geometry.hpp"
#include "canopyskel/likelihood_map.hpp"

namespace canopyskel {

struct SmoothingConfig {
  /// Neighbours averaged per vertex. Iterated averaging collapses runs of
  /// neighbours-plus-one samples into points, so small values keep more of
  /// each chain.
  int neighbors_k = 4;
  /// Stop once the summed vertex displacement of one iteration drops below this (m).
  double convergence_threshold = 1e-4;
  int max_iterations = 100;

  void validate() const;
};

struct PathSearchConfig {
  /// Voxels below this likelihood are not graph nodes.
  double p_min = 0.05;
  double max_path_cost = std::numeric_limits<double>::infinity();

  void validate() const;
};

/// Vertices at `spacing` arc-length intervals along every segment, both
/// endpoints included. Vertices closer than 1e-9 m are merged.
std::vector<SkeletonVertex> sample_vertices(std::span<const SegmentChain> chains, double spacing);

struct SmoothingStats {
  int iterations = 0;
  double last_displacement = 0.0;
};

/// Synchronous k-nearest-neighbour averaging, repeated until the total
/// displacement converges or max_iterations is reached.
std::vector<SkeletonVertex> laplacian_smooth(std::vector<SkeletonVertex> vertices,
                                             const SmoothingConfig& cfg = {},
                                             SmoothingStats* stats = nullptr);

/// Euclidean MST over the vertices with every edge longer than `voxel_size`
/// removed. The result is a forest.
SkeletonGraph build_initial_graph(std::vector<SkeletonVertex> vertices, double voxel_size);

/// Weighted 26-connected graph over the voxels whose likelihood is at least
/// p_min. Node ids follow ascending linear voxel key.
class LikelihoodGraph {
 public:
  LikelihoodGraph() = default;
  LikelihoodGraph(const LikelihoodGrid& grid, double p_min);

  const GridSpec& spec() const { return spec_; }
  std::size_t node_count() const { return keys_.size(); }
  std::size_t edge_count() const { return neighbors_.size() / 2; }
  bool empty() const { return keys_.empty(); }

  std::optional<std::uint32_t> node_of(const VoxelIndex& v) const;
  std::optional<std::uint32_t> node_at(const Point3& p) const;
  VoxelIndex voxel(std::uint32_t node) const { return spec_.unlinear(keys_[node]); }
  std::uint64_t key(std::uint32_t node) const { return keys_[node]; }
  double likelihood(std::uint32_t node) const { return probs_[node]; }

  std::span<const std::uint32_t> neighbors(std::uint32_t node) const {
    return {neighbors_.data() + offsets_[node], neighbors_.data() + offsets_[node + 1]};
  }
  /// Negative log of the mean likelihood of the two endpoints.
  double edge_cost(std::uint32_t u, std::uint32_t v) const;

 private:
  GridSpec spec_;
  std::vector<std::uint64_t> keys_;
  std::vector<double> probs_;
  std::vector<std::uint32_t> offsets_{0};
  std::vector<std::uint32_t> neighbors_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
};

LikelihoodGraph build_likelihood_graph(const LikelihoodGrid& grid, const PathSearchConfig& cfg = {});

struct VoxelPath {
  std::vector<VoxelIndex> voxels;
  double cost = 0.0;
};

/// Cheapest path in `graph` from any voxel holding a `from` point to any voxel
/// holding a `to` point. Points whose voxel is not a graph node are skipped.
/// Ties resolve by (cost, voxel count, voxel keys).
std::optional<VoxelPath> min_cost_path(std::span<const Point3> from, std::span<const Point3> to,
                                       const LikelihoodGraph& graph);

struct JoinStats {
  std::size_t joins = 0;
  std::size_t path_vertices = 0;
  std::vector<double> join_costs;
};

/// Repeatedly joins the two components of the skeleton separated by the
/// globally cheapest likelihood-graph path, inserting path vertices at voxel
/// centres, until no path remains (or the cheapest exceeds max_path_cost).
///
/// Every iteration selects the minimum over all component pairs; it is
/// evaluated with one multi-source search whose labels split the likelihood
/// graph into per-component regions, since the cheapest inter-component path
/// always crosses a region boundary. New path vertices are added as sources
/// incrementally.
SkeletonGraph join_subgraphs(SkeletonGraph forest, const LikelihoodGraph& graph,
                             const PathSearchConfig& cfg = {}, JoinStats* stats = nullptr);

}  // namespace canopyskel
