#include "canopyskel/likelihood_map.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "canopyskel/io.hpp"

namespace canopyskel {

// ---------------------------------------------------------------------------
// GridSpec

void GridSpec::validate() const {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw std::invalid_argument("grid voxel_size must be > 0");
  }
  if (!is_finite(origin)) throw std::invalid_argument("grid origin must be finite");
  for (auto d : dims) {
    if (d < 1) throw std::invalid_argument("grid dims must each be >= 1");
    if (d >= (1 << 21)) throw std::invalid_argument("grid dims must each be < 2^21");
  }
}

bool GridSpec::contains(const VoxelIndex& v) const {
  return v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x < dims[0] && v.y < dims[1] && v.z < dims[2];
}

std::size_t GridSpec::voxel_count() const {
  return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
         static_cast<std::size_t>(dims[2]);
}

VoxelIndex GridSpec::voxel_of(const Point3& p) const {
  const Point3 rel = (p - origin) / voxel_size;
  auto clamp_i = [](double v) {
    constexpr double lim = 1 << 30;
    return static_cast<std::int32_t>(std::clamp(std::floor(v), -lim, lim));
  };
  return {clamp_i(rel.x()), clamp_i(rel.y()), clamp_i(rel.z())};
}

Point3 GridSpec::center(const VoxelIndex& v) const {
  return origin + voxel_size * Point3(v.x + 0.5, v.y + 0.5, v.z + 0.5);
}

std::uint64_t GridSpec::linear(const VoxelIndex& v) const {
  return static_cast<std::uint64_t>(v.x) +
         static_cast<std::uint64_t>(dims[0]) *
             (static_cast<std::uint64_t>(v.y) +
              static_cast<std::uint64_t>(dims[1]) * static_cast<std::uint64_t>(v.z));
}

VoxelIndex GridSpec::unlinear(std::uint64_t key) const {
  const auto nx = static_cast<std::uint64_t>(dims[0]);
  const auto ny = static_cast<std::uint64_t>(dims[1]);
  return {static_cast<std::int32_t>(key % nx), static_cast<std::int32_t>((key / nx) % ny),
          static_cast<std::int32_t>(key / (nx * ny))};
}

void EllipsoidKernelConfig::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("ellipsoid k must be > 0");
}

// ---------------------------------------------------------------------------
// Kernel

double observed_prob(const LineSegment& seg, const Point3& voxel_center,
                     const EllipsoidKernelConfig& cfg) {
  if (!(seg.radius > 0.0)) throw GeometryError("observed_prob: segment radius must be > 0");
  const AxialRadial d = point_segment_distances(voxel_center, seg);
  const double l = seg.length();
  const double a = d.axial / l;
  const double r = d.radial / seg.radius;
  const double norm = std::sqrt(a * a + r * r);
  // Points on the segment carry rounding noise in the radial distance.
  if (norm < 1e-12) return seg.confidence;
  const double p = seg.confidence - (seg.confidence / cfg.k) * norm;
  return std::max(0.0, p);
}

// ---------------------------------------------------------------------------
// LikelihoodGrid

LikelihoodGrid::LikelihoodGrid(GridSpec spec) : spec_(spec) { spec_.validate(); }

double LikelihoodGrid::at(const VoxelIndex& v) const {
  if (!spec_.contains(v)) return 0.0;
  const auto it = cells_.find(spec_.linear(v));
  return it == cells_.end() ? 0.0 : it->second;
}

void LikelihoodGrid::fuse_into(const VoxelIndex& v, double p_obs) {
  if (!spec_.contains(v) || !(p_obs >= kStoreFloor)) return;
  double& cell = cells_[spec_.linear(v)];
  cell = std::min(1.0, fuse(cell, std::min(p_obs, 1.0)));
}

std::vector<std::pair<VoxelIndex, double>> LikelihoodGrid::sorted_cells() const {
  std::vector<std::pair<std::uint64_t, double>> raw(cells_.begin(), cells_.end());
  std::sort(raw.begin(), raw.end());
  std::vector<std::pair<VoxelIndex, double>> out;
  out.reserve(raw.size());
  for (const auto& [key, p] : raw) out.emplace_back(spec_.unlinear(key), p);
  return out;
}

void LikelihoodGrid::merge(const LikelihoodGrid& other) {
  const auto& os = other.spec();
  if (os.dims != spec_.dims || os.voxel_size != spec_.voxel_size || os.origin != spec_.origin) {
    throw std::invalid_argument("LikelihoodGrid::merge: grid specs differ");
  }
  for (const auto& [key, p] : other.cells_) {
    double& cell = cells_[key];
    cell = std::min(1.0, fuse(cell, p));
  }
}

// ---------------------------------------------------------------------------
// Rasterization

std::vector<VoxelIndex> traverse_segment(const GridSpec& spec, const Point3& a, const Point3& b) {
  std::vector<VoxelIndex> out;
  VoxelIndex cur = spec.voxel_of(a);
  const VoxelIndex last = spec.voxel_of(b);
  const Point3 dir = b - a;
  const Point3 start = (a - spec.origin) / spec.voxel_size;

  std::array<int, 3> step{};
  Point3 t_max;
  Point3 t_delta;
  const std::array<std::int32_t, 3> cur_arr{cur.x, cur.y, cur.z};
  for (int i = 0; i < 3; ++i) {
    const double d = dir[i] / spec.voxel_size;
    if (d > 0) {
      step[i] = 1;
      t_delta[i] = 1.0 / d;
      t_max[i] = (cur_arr[i] + 1 - start[i]) / d;
    } else if (d < 0) {
      step[i] = -1;
      t_delta[i] = -1.0 / d;
      t_max[i] = (cur_arr[i] - start[i]) / d;
    } else {
      step[i] = 0;
      t_delta[i] = std::numeric_limits<double>::infinity();
      t_max[i] = std::numeric_limits<double>::infinity();
    }
  }

  const std::size_t max_steps = static_cast<std::size_t>(std::abs(last.x - cur.x)) +
                                static_cast<std::size_t>(std::abs(last.y - cur.y)) +
                                static_cast<std::size_t>(std::abs(last.z - cur.z)) + 1;
  for (std::size_t n = 0; n < max_steps; ++n) {
    if (spec.contains(cur)) out.push_back(cur);
    if (cur == last) break;
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    if (t_max[axis] > 1.0) break;
    if (axis == 0) cur.x += step[0];
    if (axis == 1) cur.y += step[1];
    if (axis == 2) cur.z += step[2];
    t_max[axis] += t_delta[axis];
  }
  return out;
}

namespace {

void rasterize_segment(LikelihoodGrid& grid, const LineSegment& seg,
                       const EllipsoidKernelConfig& cfg) {
  const double len = seg.length();
  if (!(len > 0.0)) return;
  const GridSpec& spec = grid.spec();
  const Point3 unit = (seg.b - seg.a) / len;
  const double reach_axial = cfg.k * len;
  const double reach_radial = cfg.k * seg.radius;

  // Tight box around the support: the cylinder of radius k*r about the
  // segment extended by k*l past each end.
  const Point3 a_ext = seg.a - reach_axial * unit;
  const Point3 b_ext = seg.b + reach_axial * unit;
  Point3 pad;
  for (int i = 0; i < 3; ++i) pad[i] = reach_radial * std::sqrt(std::max(0.0, 1.0 - unit[i] * unit[i]));
  const Point3 lo = a_ext.cwiseMin(b_ext) - pad;
  const Point3 hi = a_ext.cwiseMax(b_ext) + pad;

  std::array<std::int32_t, 3> vlo{};
  std::array<std::int32_t, 3> vhi{};
  for (int i = 0; i < 3; ++i) {
    const double first = std::ceil((lo[i] - spec.origin[i]) / spec.voxel_size - 0.5);
    const double final_ = std::floor((hi[i] - spec.origin[i]) / spec.voxel_size - 0.5);
    vlo[i] = static_cast<std::int32_t>(std::max(first, 0.0));
    vhi[i] = static_cast<std::int32_t>(std::min(final_, static_cast<double>(spec.dims[i] - 1)));
  }

  const auto pierced = traverse_segment(spec, seg.a, seg.b);
  std::unordered_set<std::uint64_t> pierced_keys;
  pierced_keys.reserve(pierced.size() * 2);
  for (const auto& v : pierced) pierced_keys.insert(spec.linear(v));

  for (std::int32_t z = vlo[2]; z <= vhi[2]; ++z) {
    for (std::int32_t y = vlo[1]; y <= vhi[1]; ++y) {
      for (std::int32_t x = vlo[0]; x <= vhi[0]; ++x) {
        const VoxelIndex v{x, y, z};
        if (pierced_keys.contains(spec.linear(v))) continue;
        grid.fuse_into(v, observed_prob(seg, spec.center(v), cfg));
      }
    }
  }
  for (const auto& v : pierced) grid.fuse_into(v, seg.confidence);
}

}  // namespace

void apply_observation(LikelihoodGrid& grid, const SegmentChain& chain,
                       const EllipsoidKernelConfig& cfg) {
  cfg.validate();
  for (const auto& seg : chain.segments) rasterize_segment(grid, seg, cfg);
}

void accumulate(LikelihoodGrid& grid, std::span<const SegmentChain> chains,
                const EllipsoidKernelConfig& cfg, unsigned jobs) {
  cfg.validate();
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(chains.size())));
  if (jobs <= 1) {
    for (const auto& chain : chains) apply_observation(grid, chain, cfg);
    return;
  }
  std::vector<LikelihoodGrid> partials(jobs, LikelihoodGrid(grid.spec()));
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < chains.size(); i += jobs) {
        apply_observation(partials[w], chains[i], cfg);
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& part : partials) grid.merge(part);
}

GridSpec grid_spec_for(std::span<const SegmentChain> chains, double voxel_size,
                       const EllipsoidKernelConfig& cfg) {
  GridSpec spec;
  spec.voxel_size = voxel_size;
  if (chains.empty()) {
    spec.validate();
    return spec;
  }
  Point3 lo = Point3::Constant(std::numeric_limits<double>::infinity());
  Point3 hi = -lo;
  for (const auto& chain : chains) {
    for (const auto& seg : chain.segments) {
      const double pad = std::max(cfg.k * seg.length(), cfg.k * seg.radius);
      lo = lo.cwiseMin(seg.a.cwiseMin(seg.b) - Point3::Constant(pad));
      hi = hi.cwiseMax(seg.a.cwiseMax(seg.b) + Point3::Constant(pad));
    }
  }
  // Snap the origin to the world lattice of the voxel size.
  for (int i = 0; i < 3; ++i) {
    spec.origin[i] = std::floor(lo[i] / voxel_size) * voxel_size;
    spec.dims[i] = std::max<std::int32_t>(
        1, static_cast<std::int32_t>(std::ceil((hi[i] - spec.origin[i]) / voxel_size)));
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Debug dump

void write_grid(std::ostream& os, const LikelihoodGrid& grid) {
  const auto& s = grid.spec();
  fmt::print(os, "grid {} {} {} {} {} {} {}\n", s.origin.x(), s.origin.y(), s.origin.z(),
             s.voxel_size, s.dims[0], s.dims[1], s.dims[2]);
  for (const auto& [v, p] : grid.sorted_cells()) fmt::print(os, "{} {} {} {}\n", v.x, v.y, v.z, p);
}

LikelihoodGrid read_grid(std::istream& is) {
  LineReader reader(is);
  std::string line;
  if (!reader.next(line)) throw ParseError(reader.line_number(), "missing grid header");
  std::istringstream hs(line);
  std::string tag;
  GridSpec spec;
  if (!(hs >> tag >> spec.origin.x() >> spec.origin.y() >> spec.origin.z() >> spec.voxel_size >>
        spec.dims[0] >> spec.dims[1] >> spec.dims[2]) ||
      tag != "grid") {
    throw ParseError(reader.line_number(), "malformed grid header");
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(reader.line_number(), e.what());
  }
  LikelihoodGrid grid(spec);
  while (reader.next(line)) {
    std::istringstream ls(line);
    VoxelIndex v;
    double p = 0.0;
    if (!(ls >> v.x >> v.y >> v.z >> p) || !spec.contains(v) || !(p > 0.0 && p <= 1.0)) {
      throw ParseError(reader.line_number(), "malformed grid cell");
    }
    grid.fuse_into(v, p);
  }
  return grid;
}

}  // namespace canopyskel
