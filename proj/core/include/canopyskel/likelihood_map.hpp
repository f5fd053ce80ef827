#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "canopyskel/geometry.hpp"

namespace canopyskel {

/// Integer voxel coordinate.
struct VoxelIndex {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
  friend auto operator<=>(const VoxelIndex&, const VoxelIndex&) = default;
};

struct GridSpec {
  Point3 origin = Point3::Zero();
  double voxel_size = 0.02;
  std::array<std::int32_t, 3> dims{1, 1, 1};

  void validate() const;
  bool contains(const VoxelIndex& v) const;
  std::size_t voxel_count() const;
  /// Voxel containing p; may lie outside the grid bounds.
  VoxelIndex voxel_of(const Point3& p) const;
  Point3 center(const VoxelIndex& v) const;
  /// Dense linear index (x fastest). Only valid for contained voxels.
  std::uint64_t linear(const VoxelIndex& v) const;
  VoxelIndex unlinear(std::uint64_t key) const;
};

struct EllipsoidKernelConfig {
  double k = 3.0;

  void validate() const;
};

/// Per-observation skeleton-occupancy probability of a voxel centered at
/// `voxel_center` for one fitted segment: c on the segment, decaying along an
/// ellipsoidal contour and clamped to zero outside the support.
double observed_prob(const LineSegment& seg, const Point3& voxel_center,
                     const EllipsoidKernelConfig& cfg = {});

/// Independent-evidence fusion of a prior and an observed probability.
inline double fuse(double p_prior, double p_obs) {
  // Expanded form keeps fuse(0, x) == x exact; certainty short-circuits.
  if (p_prior >= 1.0 || p_obs >= 1.0) return 1.0;
  return std::min(1.0, p_prior + p_obs - p_prior * p_obs);
}

/// Sparse voxel grid of skeleton-occupancy likelihoods. Absent cells hold 0;
/// stored cells hold values in (0, 1].
class LikelihoodGrid {
 public:
  /// Values below this are never stored.
  static constexpr double kStoreFloor = 1e-9;

  explicit LikelihoodGrid(GridSpec spec);

  const GridSpec& spec() const { return spec_; }
  double at(const VoxelIndex& v) const;
  /// Fuses `p_obs` into the voxel. Out-of-bounds voxels are ignored.
  void fuse_into(const VoxelIndex& v, double p_obs);
  std::size_t stored_count() const { return cells_.size(); }

  /// Stored cells sorted by linear key.
  std::vector<std::pair<VoxelIndex, double>> sorted_cells() const;
  const std::unordered_map<std::uint64_t, double>& raw_cells() const { return cells_; }

  /// Fuses every cell of `other` (which must share this grid's spec).
  void merge(const LikelihoodGrid& other);

 private:
  GridSpec spec_;
  std::unordered_map<std::uint64_t, double> cells_;
};

/// Voxels pierced by the closed segment [a, b] (3D DDA traversal), clipped
/// to the grid. Order follows the traversal from a to b.
std::vector<VoxelIndex> traverse_segment(const GridSpec& spec, const Point3& a, const Point3& b);

/// Rasterizes the three segments of `chain` into `grid`, fusing each
/// segment's kernel independently.
void apply_observation(LikelihoodGrid& grid, const SegmentChain& chain,
                       const EllipsoidKernelConfig& cfg = {});

/// Applies every chain. With jobs > 1 the chains are split into partitions
/// rasterized into private grids and fused afterwards.
void accumulate(LikelihoodGrid& grid, std::span<const SegmentChain> chains,
                const EllipsoidKernelConfig& cfg = {}, unsigned jobs = 1);

/// Grid bounds covering every chain's kernel support.
GridSpec grid_spec_for(std::span<const SegmentChain> chains, double voxel_size,
                       const EllipsoidKernelConfig& cfg = {});

/// "grid ox oy oz voxel_size nx ny nz" header, then one "ix iy iz p" line per
/// stored voxel in linear-key order.
void write_grid(std::ostream& os, const LikelihoodGrid& grid);
LikelihoodGrid read_grid(std::istream& is);

}  // namespace canopyskel
