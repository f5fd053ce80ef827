#include "canopyskel/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

namespace canopyskel {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(engine_); }

 private:
  std::mt19937_64 engine_;
};

/// Any orthonormal pair perpendicular to unit vector d.
std::pair<Point3, Point3> perpendicular_basis(const Point3& d) {
  int axis = 0;
  d.cwiseAbs().minCoeff(&axis);
  Point3 helper = Point3::Zero();
  helper[axis] = 1.0;
  const Point3 e1 = d.cross(helper).normalized();
  const Point3 e2 = d.cross(e1).normalized();
  return {e1, e2};
}

Point3 tilt(const Point3& d, double angle_rad, double azimuth_rad) {
  const auto [e1, e2] = perpendicular_basis(d);
  const Point3 side = std::cos(azimuth_rad) * e1 + std::sin(azimuth_rad) * e2;
  return (std::cos(angle_rad) * d + std::sin(angle_rad) * side).normalized();
}

// Stream separation so the same seed drives independent draws.
constexpr std::uint64_t kOccluderStream = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kNoiseStream = 0xC2B2AE3D27D4EB4Full;

}  // namespace

void TreeGenParams::validate() const {
  if (depth < 1) throw std::invalid_argument("tree depth must be >= 1");
  if (children_min < 1 || children_max < children_min) {
    throw std::invalid_argument("tree children range must satisfy 1 <= min <= max");
  }
  if (!(branch_length_decay > 0.0 && branch_length_decay < 1.0)) {
    throw std::invalid_argument("branch_length_decay must be in (0, 1)");
  }
  if (!(branch_radius_decay > 0.0 && branch_radius_decay < 1.0)) {
    throw std::invalid_argument("branch_radius_decay must be in (0, 1)");
  }
  if (!(trunk_length > 0.0) || !(trunk_radius > 0.0)) {
    throw std::invalid_argument("trunk length and radius must be > 0");
  }
  if (!(branching_angle_min_deg >= 0.0 && branching_angle_max_deg >= branching_angle_min_deg &&
        branching_angle_max_deg < 180.0)) {
    throw std::invalid_argument("branching angle range must satisfy 0 <= min <= max < 180");
  }
  if (!(attach_min_fraction >= 0.0 && attach_min_fraction <= 1.0)) {
    throw std::invalid_argument("attach_min_fraction must be in [0, 1]");
  }
  if (!(max_bend_deg >= 0.0)) throw std::invalid_argument("max_bend_deg must be >= 0");
  if (!(sample_spacing > 0.0)) throw std::invalid_argument("sample_spacing must be > 0");
}

TreeGenParams TreeGenParams::preset(const std::string& species, std::uint64_t seed) {
  TreeGenParams p;
  p.rng_seed = seed;
  p.species = species;
  if (species == "generic") return p;
  if (species == "oak") {
    p.children_min = 3;
    p.children_max = 4;
    p.branching_angle_min_deg = 35.0;
    p.branching_angle_max_deg = 65.0;
    p.branch_length_decay = 0.65;
    p.trunk_length = 0.9;
    p.trunk_radius = 0.06;
    return p;
  }
  if (species == "apple") {
    p.children_min = 2;
    p.children_max = 4;
    p.branching_angle_min_deg = 30.0;
    p.branching_angle_max_deg = 60.0;
    p.branch_length_decay = 0.75;
    p.trunk_length = 0.7;
    p.max_bend_deg = 15.0;
    return p;
  }
  if (species == "walnut") {
    p.children_min = 2;
    p.children_max = 3;
    p.branching_angle_min_deg = 20.0;
    p.branching_angle_max_deg = 45.0;
    p.trunk_length = 1.2;
    p.trunk_radius = 0.055;
    return p;
  }
  throw std::invalid_argument("unknown tree species preset: " + species);
}

GroundTruthSkeleton generate_tree(const TreeGenParams& params) {
  params.validate();
  Rng rng(params.rng_seed);
  GroundTruthSkeleton gt;

  struct Pending {
    std::optional<std::size_t> base;
    Point3 start;
    Point3 direction;
    double length;
    double radius;
    int level;
    int parent;
  };

  std::deque<Pending> queue;
  {
    const double lean = rng.uniform(0.0, 5.0) * kDeg;
    const double az = rng.uniform(0.0, 2.0 * std::numbers::pi);
    queue.push_back({std::nullopt, Point3::Zero(), tilt(Point3::UnitZ(), lean, az),
                     params.trunk_length, params.trunk_radius, 0, -1});
  }

  while (!queue.empty()) {
    const Pending job = queue.front();
    queue.pop_front();

    GeneratedBranch branch;
    branch.level = job.level;
    branch.parent = job.parent;
    branch.radius = job.radius;
    if (job.base) {
      branch.vertices.push_back(*job.base);
    } else {
      branch.vertices.push_back(gt.graph.add_vertex({job.start, job.radius, Provenance::Observed}));
    }

    const int steps = std::max(1, static_cast<int>(std::lround(job.length / params.sample_spacing)));
    const double step_len = job.length / steps;
    const double bend = rng.uniform(0.0, params.max_bend_deg) * kDeg;
    const auto [e1, e2] = perpendicular_basis(job.direction);
    const double bend_az = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Point3 bend_axis = (std::cos(bend_az) * e1 + std::sin(bend_az) * e2).normalized();
    const Eigen::AngleAxisd per_step(bend / steps, bend_axis);

    std::vector<Point3> step_dirs;
    Point3 dir = job.direction;
    Point3 pos = job.start;
    for (int i = 0; i < steps; ++i) {
      pos += step_len * dir;
      step_dirs.push_back(dir);
      const std::size_t id = gt.graph.add_vertex({pos, job.radius, Provenance::Observed});
      gt.graph.add_edge(branch.vertices.back(), id);
      branch.vertices.push_back(id);
      dir = (per_step * dir).normalized();
    }

    const int branch_id = static_cast<int>(gt.branches.size());
    gt.branches.push_back(branch);

    if (job.level + 1 >= params.depth) continue;
    const int children = rng.uniform_int(params.children_min, params.children_max);
    for (int c = 0; c < children; ++c) {
      const double frac = rng.uniform(params.attach_min_fraction, 1.0);
      const int at = std::clamp(static_cast<int>(std::lround(frac * steps)), 1, steps);
      const double angle = rng.uniform(params.branching_angle_min_deg, params.branching_angle_max_deg) * kDeg;
      const double az = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const std::size_t base = branch.vertices[static_cast<std::size_t>(at)];
      queue.push_back({base, gt.graph.vertices()[base].position,
                       tilt(step_dirs[static_cast<std::size_t>(at - 1)], angle, az),
                       job.length * params.branch_length_decay, job.radius * params.branch_radius_decay,
                       job.level + 1, branch_id});
    }
  }
  return gt;
}

// ---------------------------------------------------------------------------
// Observation simulation

void OcclusionParams::validate() const {
  if (foliage_density_level < 1 || foliage_density_level > 4) {
    throw std::invalid_argument("foliage_density_level must be in 1..4");
  }
  if (occluder_count && *occluder_count < 0) throw std::invalid_argument("occluder_count must be >= 0");
  if (!(occluders_per_m3_per_level >= 0.0)) {
    throw std::invalid_argument("occluders_per_m3_per_level must be >= 0");
  }
  if (!(occluder_radius_min > 0.0 && occluder_radius_max >= occluder_radius_min)) {
    throw std::invalid_argument("occluder radius range must satisfy 0 < min <= max");
  }
  if (!(surface_point_density > 0.0)) throw std::invalid_argument("surface_point_density must be > 0");
  if (!(point_noise_sigma >= 0.0)) throw std::invalid_argument("point_noise_sigma must be >= 0");
  if (!(confidence_min > 0.0 && confidence_max >= confidence_min && confidence_max <= 1.0)) {
    throw std::invalid_argument("confidence range must lie in (0, 1]");
  }
  if (!(max_cluster_length > 0.0)) throw std::invalid_argument("max_cluster_length must be > 0");
  if (min_cluster_points < 2) throw std::invalid_argument("min_cluster_points must be >= 2");
  if (viewpoint_count < 1) throw std::invalid_argument("viewpoint_count must be >= 1");
  if (!(viewpoint_spread_deg >= 0.0 && viewpoint_spread_deg <= 360.0)) {
    throw std::invalid_argument("viewpoint_spread_deg must be in [0, 360]");
  }
}

namespace {

/// Bounding box of the crown: every branch but the trunk, or the trunk
/// itself for a bare stem. Extents are floored at 0.1 m.
Eigen::AlignedBox3d canopy_box(const GroundTruthSkeleton& gt) {
  Eigen::AlignedBox3d box;
  const auto& verts = gt.graph.vertices();
  for (const auto& br : gt.branches) {
    if (br.level == 0 && gt.branches.size() > 1) continue;
    for (auto v : br.vertices) box.extend(verts[v].position);
  }
  if (box.isEmpty()) {
    for (const auto& v : verts) box.extend(v.position);
  }
  if (box.isEmpty()) return box;
  const Point3 pad = (Point3::Constant(0.1) - box.sizes()).cwiseMax(0.0) / 2.0;
  box.min() -= pad;
  box.max() += pad;
  return box;
}

}  // namespace

int derived_occluder_count(const GroundTruthSkeleton& gt, const OcclusionParams& params) {
  if (params.occluder_count) return *params.occluder_count;
  const auto box = canopy_box(gt);
  if (box.isEmpty()) return 0;
  return static_cast<int>(
      std::lround(params.occluders_per_m3_per_level * params.foliage_density_level * box.volume()));
}

Observations simulate_observations(const GroundTruthSkeleton& gt, const OcclusionParams& params,
                                   std::span<const Sphere> extra_occluders) {
  params.validate();
  Rng rng(params.rng_seed);
  Rng occluder_rng(params.occluder_seed ^ kOccluderStream);
  Rng noise_rng(params.rng_seed ^ kNoiseStream);
  const auto& verts = gt.graph.vertices();

  std::vector<Point3> view_dirs;
  for (int i = 0; i < params.viewpoint_count; ++i) {
    const double t = params.viewpoint_count == 1
                         ? 0.0
                         : static_cast<double>(i) / (params.viewpoint_count - 1) - 0.5;
    const double az = t * params.viewpoint_spread_deg * kDeg;
    view_dirs.emplace_back(std::cos(az), std::sin(az), 0.0);
  }

  // (1) one-sided surface samples, tagged with their centreline interval.
  struct Sample {
    Point3 p;
    std::size_t branch;
    std::size_t interval;
  };
  std::vector<Sample> samples;
  for (std::size_t b = 0; b < gt.branches.size(); ++b) {
    const auto& br = gt.branches[b];
    for (std::size_t j = 0; j + 1 < br.vertices.size(); ++j) {
      const Point3& p0 = verts[br.vertices[j]].position;
      const Point3& p1 = verts[br.vertices[j + 1]].position;
      const Point3 axis = p1 - p0;
      const double len = axis.norm();
      if (!(len > 0.0)) continue;
      const auto [e1, e2] = perpendicular_basis(axis / len);
      const double expected = 2.0 * std::numbers::pi * br.radius * len * params.surface_point_density;
      const int count = static_cast<int>(std::floor(expected + rng.uniform()));
      for (int k = 0; k < count; ++k) {
        const double s = rng.uniform();
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const Point3 normal = std::cos(phi) * e1 + std::sin(phi) * e2;
        const bool visible = std::any_of(view_dirs.begin(), view_dirs.end(),
                                         [&](const Point3& v) { return normal.dot(v) > 0.0; });
        if (visible) samples.push_back({p0 + s * axis + br.radius * normal, b, j});
      }
    }
  }

  // (2) spherical occluders at uniform foliage positions in the crown.
  Observations obs;
  const int n_occ = derived_occluder_count(gt, params);
  const auto crown = canopy_box(gt);
  for (int i = 0; i < n_occ && !crown.isEmpty(); ++i) {
    Point3 center;
    for (int a = 0; a < 3; ++a) center[a] = occluder_rng.uniform(crown.min()[a], crown.max()[a]);
    const double radius = occluder_rng.uniform(params.occluder_radius_min, params.occluder_radius_max);
    obs.occluders.push_back({center, radius});
  }
  obs.occluders.insert(obs.occluders.end(), extra_occluders.begin(), extra_occluders.end());

  std::vector<std::vector<std::vector<Point3>>> survivors(gt.branches.size());
  for (std::size_t b = 0; b < gt.branches.size(); ++b) {
    survivors[b].resize(gt.branches[b].vertices.size() > 0 ? gt.branches[b].vertices.size() - 1 : 0);
  }
  for (const auto& s : samples) {
    const bool hidden = std::any_of(obs.occluders.begin(), obs.occluders.end(), [&](const Sphere& o) {
      return (s.p - o.center).squaredNorm() < o.radius * o.radius;
    });
    if (!hidden) survivors[s.branch][s.interval].push_back(s.p);
  }

  // (3) slender clusters: contiguous visible runs per branch, capped in length.
  std::vector<bool> covered(verts.size(), false);
  int next_id = 0;
  for (std::size_t b = 0; b < gt.branches.size(); ++b) {
    const auto& br = gt.branches[b];
    const auto& ivs = survivors[b];
    std::size_t j = 0;
    while (j < ivs.size()) {
      if (ivs[j].empty()) {
        ++j;
        continue;
      }
      std::size_t end = j;
      double run_len = 0.0;
      while (end < ivs.size() && !ivs[end].empty()) {
        run_len += (verts[br.vertices[end + 1]].position - verts[br.vertices[end]].position).norm();
        ++end;
      }
      const std::size_t run = end - j;
      const auto pieces = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(run_len / params.max_cluster_length - 1e-9)));
      for (std::size_t piece = 0; piece < pieces; ++piece) {
        const std::size_t from = j + run * piece / pieces;
        const std::size_t to = j + run * (piece + 1) / pieces;
        BranchCluster cluster;
        for (std::size_t q = from; q < to; ++q) {
          cluster.points.insert(cluster.points.end(), ivs[q].begin(), ivs[q].end());
        }
        if (static_cast<int>(cluster.points.size()) < params.min_cluster_points) continue;
        // (4) isotropic Gaussian noise, truncated at 3 sigma.
        for (auto& p : cluster.points) {
          if (params.point_noise_sigma <= 0.0) break;
          Point3 n;
          do {
            n = Point3(noise_rng.normal(params.point_noise_sigma), noise_rng.normal(params.point_noise_sigma),
                       noise_rng.normal(params.point_noise_sigma));
          } while (n.norm() > 3.0 * params.point_noise_sigma);
          p += n;
        }
        // (5) detector confidence.
        cluster.confidence = rng.uniform(params.confidence_min, params.confidence_max);
        cluster.cluster_id = next_id++;
        cluster.view_id = 0;
        for (std::size_t q = from; q < to; ++q) {
          covered[br.vertices[q]] = true;
          covered[br.vertices[q + 1]] = true;
        }
        obs.clusters.push_back(std::move(cluster));
      }
      j = end;
    }
  }
  obs.occluded_mask.resize(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) obs.occluded_mask[i] = !covered[i];
  return obs;
}

}  // namespace canopyskel
