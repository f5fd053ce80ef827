#include "canopyskel/segment_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <Eigen/Dense>

namespace canopyskel {

void FitConfig::validate() const {
  if (min_points_full_fit < 4) throw std::invalid_argument("min_points_full_fit must be >= 4");
  if (max_parameter_corrections < 0) {
    throw std::invalid_argument("max_parameter_corrections must be >= 0");
  }
  if (!(default_radius > 0.0)) throw std::invalid_argument("default_radius must be > 0");
}

PrincipalAxes principal_axes(std::span<const Point3> points) {
  if (points.empty()) throw GeometryError("principal_axes: empty point set");
  PrincipalAxes pa;
  for (const auto& p : points) pa.centroid += p;
  pa.centroid /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Point3 d = p - pa.centroid;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  // Eigen returns ascending eigenvalues; flip to descending.
  for (int i = 0; i < 3; ++i) {
    pa.variances[i] = std::max(0.0, solver.eigenvalues()[2 - i]);
    pa.axes.col(i) = solver.eigenvectors().col(2 - i);
  }

  // Orient each of the first two axes by the sign of the third moment of the
  // projections so the frame moves with the points under rigid motions.
  for (int i = 0; i < 2; ++i) {
    double skew = 0.0;
    double scale = 0.0;
    for (const auto& p : points) {
      const double t = (p - pa.centroid).dot(pa.axes.col(i));
      skew += t * t * t;
      scale += std::abs(t * t * t);
    }
    bool flip = false;
    if (std::abs(skew) > 1e-9 * scale) {
      flip = skew < 0.0;
    } else {
      int big = 0;
      pa.axes.col(i).cwiseAbs().maxCoeff(&big);
      flip = pa.axes(big, i) < 0.0;
    }
    if (flip) pa.axes.col(i) = -pa.axes.col(i);
  }
  pa.axes.col(2) = pa.axes.col(0).cross(pa.axes.col(1));
  return pa;
}

double estimate_radius(std::span<const Point3> points) {
  if (points.size() < 3) throw GeometryError("estimate_radius: fewer than 3 points");
  const PrincipalAxes pa = principal_axes(points);
  const double tol = 1e-12 * std::max(pa.variances[0], 1e-300);
  if (!(pa.variances[0] > 0.0) || pa.variances[1] <= tol) {
    throw GeometryError("estimate_radius: point set has rank < 2");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const Point3 axis = pa.axes.col(1);
  for (const auto& p : points) {
    const double t = (p - pa.centroid).dot(axis);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  const double r = 0.5 * (hi - lo);
  if (!(r > 0.0)) throw GeometryError("estimate_radius: zero spread along PC2");
  return r;
}

double estimate_radius(const BranchCluster& cluster) { return estimate_radius(cluster.points); }

namespace {

using ControlPoints = std::array<Point3, 4>;

// Ratio of squared residuals below which the orthogonal fit replaces the
// axial one: 1% of the residual, i.e. a tenth of the RMS distance.
constexpr double kOrthogonalPreference = 0.01;

struct FootPoint {
  double param = 0.0;
  double dist2 = 0.0;
};

FootPoint project_to_chain(const Point3& p, const ControlPoints& cps) {
  FootPoint best{0.0, std::numeric_limits<double>::infinity()};
  for (int i = 0; i < 3; ++i) {
    const Point3 ab = cps[i + 1] - cps[i];
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - cps[i]).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double d2 = (p - (cps[i] + s * ab)).squaredNorm();
    if (d2 < best.dist2) best = {(i + s) / 3.0, d2};
  }
  return best;
}

// Hat-function basis of the clamped degree-one B-spline with knots
// {0, 0, 1/3, 2/3, 1, 1}.
void basis_row(double t, double* row) {
  std::fill(row, row + 4, 0.0);
  const double u = std::clamp(t, 0.0, 1.0) * 3.0;
  const int span = std::min(2, static_cast<int>(std::floor(u)));
  const double s = u - span;
  row[span] = 1.0 - s;
  row[span + 1] = s;
}

std::optional<ControlPoints> solve_control_points(std::span<const Point3> targets,
                                                  const std::vector<double>& params) {
  // Normal equations; the hat basis has at most two nonzeros per row.
  Eigen::Matrix4d normal = Eigen::Matrix4d::Zero();
  Eigen::Matrix<double, 4, 3> rhs = Eigen::Matrix<double, 4, 3>::Zero();
  for (std::size_t j = 0; j < targets.size(); ++j) {
    double row[4];
    basis_row(params[j], row);
    for (int a = 0; a < 4; ++a) {
      if (row[a] == 0.0) continue;
      rhs.row(a) += row[a] * targets[j].transpose();
      for (int b = 0; b < 4; ++b) normal(a, b) += row[a] * row[b];
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(normal, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues()[0] > 1e-12 * eig.eigenvalues()[3])) return std::nullopt;
  const Eigen::Matrix<double, 4, 3> sol = normal.ldlt().solve(rhs);
  ControlPoints cps;
  for (int c = 0; c < 4; ++c) cps[c] = sol.row(c).transpose();
  return cps;
}

double residual_of(std::span<const Point3> pts, const ControlPoints& cps) {
  double sum = 0.0;
  for (const auto& p : pts) sum += project_to_chain(p, cps).dist2;
  return sum;
}

/// Orthogonal correction: each point takes the parameter of its closest
/// chain point.
bool orthogonal_params(std::span<const Point3> pts, const ControlPoints& cps, std::vector<double>& params) {
  for (std::size_t j = 0; j < pts.size(); ++j) params[j] = project_to_chain(pts[j], cps).param;
  return true;
}

/// Axial correction: each point takes the parameter where the chain reaches
/// the point's coordinate along `axis`. Needs a chain monotone along the axis.
bool axial_params(std::span<const double> coord, const ControlPoints& cps, const Point3& origin, const Point3& axis,
                  std::vector<double>& params) {
  std::array<double, 4> x;
  for (int k = 0; k < 4; ++k) x[k] = (cps[k] - origin).dot(axis);
  for (int k = 0; k < 3; ++k) {
    if (!(x[k + 1] > x[k])) return false;
  }
  for (std::size_t j = 0; j < coord.size(); ++j) {
    const double c = std::clamp(coord[j], x[0], x[3]);
    int k = 0;
    while (k < 2 && c > x[k + 1]) ++k;
    params[j] = (k + (c - x[k]) / (x[k + 1] - x[k])) / 3.0;
  }
  return true;
}

struct FitResult {
  ControlPoints cps;
  double residual = 0.0;  // sum of squared distances
  double spread = 0.0;    // sum of squared deviations of the distances from their mean
};

/// Candidates with a control point farther than `reach` from every data
/// point get infinite scores; they extrapolate rather than fit.
FitResult evaluate(std::span<const Point3> pts, const ControlPoints& cps, double reach) {
  FitResult r{cps};
  for (const auto& c : cps) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) nearest = std::min(nearest, (p - c).squaredNorm());
    if (!(nearest <= reach * reach)) {
      r.residual = r.spread = std::numeric_limits<double>::infinity();
      return r;
    }
  }
  double mean = 0.0;
  std::vector<double> d(pts.size());
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double d2 = project_to_chain(pts[j], cps).dist2;
    r.residual += d2;
    d[j] = std::sqrt(d2);
    mean += d[j];
  }
  mean /= static_cast<double>(pts.size());
  for (double x : d) r.spread += (x - mean) * (x - mean);
  return r;
}

/// Points shifted toward the chain by the mean radial distance, so that a
/// chain fitted to them runs along the middle of a surface-sampled tube.
/// Exact curve samples (zero distance) are left where they are.
std::vector<Point3> tube_targets(std::span<const Point3> pts, const ControlPoints& cps,
                                 const std::vector<double>& params) {
  std::vector<Point3> radial(pts.size());
  double rho = 0.0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    double row[4];
    basis_row(params[j], row);
    Point3 on_chain = Point3::Zero();
    for (int c = 0; c < 4; ++c) on_chain += row[c] * cps[c];
    const int span = std::min(2, static_cast<int>(std::floor(std::clamp(params[j], 0.0, 1.0) * 3.0)));
    const Point3 seg = cps[span + 1] - cps[span];
    Point3 r = pts[j] - on_chain;
    if (seg.squaredNorm() > 0.0) r -= r.dot(seg) / seg.squaredNorm() * seg;
    radial[j] = r;
    rho += r.norm();
  }
  rho /= static_cast<double>(pts.size());
  std::vector<Point3> targets(pts.begin(), pts.end());
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double len = radial[j].norm();
    if (len > 0.0) targets[j] -= radial[j] * (rho / len);
  }
  return targets;
}

struct LineFit {
  Point3 centroid;
  Point3 direction;
};

LineFit fit_line(std::span<const Point3> pts, std::span<const std::size_t> idx) {
  LineFit f{Point3::Zero(), Point3::UnitX()};
  for (auto i : idx) f.centroid += pts[i];
  f.centroid /= static_cast<double>(idx.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (auto i : idx) {
    const Point3 d = pts[i] - f.centroid;
    scatter.noalias() += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(scatter);
  f.direction = solver.eigenvectors().col(2);
  return f;
}

/// Orthogonal line-fit residual of points [b, e) of the ordering, from
/// prefix sums of first and second moments.
struct RunMoments {
  std::vector<Point3> s1;
  std::vector<Eigen::Matrix3d> s2;

  RunMoments(std::span<const Point3> pts, std::span<const std::size_t> order, const Point3& origin)
      : s1(order.size() + 1, Point3::Zero()), s2(order.size() + 1, Eigen::Matrix3d::Zero()) {
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Point3 d = pts[order[k]] - origin;
      s1[k + 1] = s1[k] + d;
      s2[k + 1] = s2[k] + d * d.transpose();
    }
  }

  double residual(std::size_t b, std::size_t e) const {
    const double m = static_cast<double>(e - b);
    const Point3 sum = s1[e] - s1[b];
    const Eigen::Matrix3d scatter = s2[e] - s2[b] - sum * sum.transpose() / m;
    const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(scatter, Eigen::EigenvaluesOnly).eigenvalues();
    return std::max(0.0, ev[0] + ev[1]);
  }
};

/// Splits the ordered points into three runs with the smallest total line
/// residual and joins the three run lines into a chain. Corners sit midway
/// between the closest points of adjacent lines; the ends are the first and
/// last points projected onto their lines.
std::optional<ControlPoints> piecewise_chain(std::span<const Point3> pts, std::span<const std::size_t> order,
                                             const Point3& origin) {
  constexpr std::size_t kMinRun = 2;
  constexpr std::size_t kCoarseSteps = 40;
  const std::size_t n = order.size();
  if (n < 3 * kMinRun) return std::nullopt;
  const RunMoments moments(pts, order, origin);

  std::size_t best_a = 0;
  std::size_t best_b = 0;
  double best = std::numeric_limits<double>::infinity();
  const auto search = [&](std::size_t a_lo, std::size_t a_hi, std::size_t b_lo, std::size_t b_hi, std::size_t step) {
    a_lo = std::max(a_lo, kMinRun);
    a_hi = std::min(a_hi, n - 2 * kMinRun);
    b_hi = std::min(b_hi, n - kMinRun);
    for (std::size_t a = a_lo; a <= a_hi; a += step) {
      for (std::size_t b = std::max(b_lo, a + kMinRun); b <= b_hi; b += step) {
        const double r = moments.residual(0, a) + moments.residual(a, b) + moments.residual(b, n);
        if (r < best) {
          best = r;
          best_a = a;
          best_b = b;
        }
      }
    }
  };
  const std::size_t step = std::max<std::size_t>(1, n / kCoarseSteps);
  search(0, n, 0, n, step);
  if (step > 1) {
    const std::size_t a0 = best_a;
    const std::size_t b0 = best_b;
    search(a0 > step ? a0 - step : 0, a0 + step, b0 > step ? b0 - step : 0, b0 + step, 1);
  }
  if (!std::isfinite(best)) return std::nullopt;

  const std::size_t cuts[4] = {0, best_a, best_b, n};
  LineFit lines[3];
  for (int s = 0; s < 3; ++s) {
    lines[s] = fit_line(pts, order.subspan(cuts[s], cuts[s + 1] - cuts[s]));
  }
  const auto onto = [](const LineFit& l, const Point3& p) {
    return Point3(l.centroid + (p - l.centroid).dot(l.direction) * l.direction);
  };
  ControlPoints cps;
  cps[0] = onto(lines[0], pts[order.front()]);
  cps[3] = onto(lines[2], pts[order.back()]);
  for (int s = 0; s < 2; ++s) {
    const LineFit& l = lines[s];
    const LineFit& m = lines[s + 1];
    const Point3 w = l.centroid - m.centroid;
    const double b = l.direction.dot(m.direction);
    const double denom = 1.0 - b * b;
    if (denom < 1e-12) {
      // Parallel runs: meet at the boundary point.
      const Point3& p = pts[order[cuts[s + 1]]];
      cps[s + 1] = 0.5 * (onto(l, p) + onto(m, p));
      continue;
    }
    const double d = l.direction.dot(w);
    const double e = m.direction.dot(w);
    const double tl = (b * e - d) / denom;
    const double tm = (e - b * d) / denom;
    cps[s + 1] = 0.5 * (l.centroid + tl * l.direction + m.centroid + tm * m.direction);
  }
  return cps;
}

/// Alternates parameter correction and least-squares solves from `cps`.
/// With `tube` set, every solve fits the tube-shifted targets. Stops when no
/// control point moves by `tolerance` or more.
template <typename Correct>
std::optional<ControlPoints> refine(std::span<const Point3> pts, ControlPoints cps, std::vector<double> params,
                                    int max_corrections, Correct&& correct, bool tube, double tolerance) {
  for (int iter = 0; iter < max_corrections; ++iter) {
    if (!correct(cps, params)) break;
    // Pin the chain ends to the extreme points; otherwise an end segment
    // may overshoot the data at no cost.
    const auto [tmin, tmax] = std::minmax_element(params.begin(), params.end());
    const double t0 = *tmin;
    const double span = *tmax - t0;
    if (!(span > 0.0)) break;
    for (auto& t : params) t = (t - t0) / span;
    const auto next = tube ? solve_control_points(tube_targets(pts, cps, params), params)
                           : solve_control_points(pts, params);
    if (!next) break;
    double moved = 0.0;
    for (int c = 0; c < 4; ++c) moved = std::max(moved, ((*next)[c] - cps[c]).norm());
    cps = *next;
    if (moved < tolerance) break;
  }
  return cps;
}

}  // namespace

double chain_residual(const SegmentChain& chain, std::span<const Point3> points) {
  return residual_of(points, chain.control_points);
}

SegmentChain fit_chain(const BranchCluster& cluster, const FitConfig& cfg) {
  cfg.validate();
  const auto& pts = cluster.points;
  if (pts.size() < 2) throw GeometryError("fit_chain: fewer than 2 points");
  cluster.validate();

  const PrincipalAxes pa = principal_axes(pts);
  const Point3 pc1 = pa.axes.col(0);
  std::vector<double> proj(pts.size());
  for (std::size_t j = 0; j < pts.size(); ++j) proj[j] = (pts[j] - pa.centroid).dot(pc1);
  const auto [lo_it, hi_it] = std::minmax_element(proj.begin(), proj.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi - lo > 1e-12)) throw GeometryError("fit_chain: zero-extent cluster");

  double radius = cfg.default_radius;
  try {
    radius = estimate_radius(pts);
  } catch (const GeometryError&) {
  }

  auto line_chain = [&] {
    ControlPoints cps;
    for (int i = 0; i < 4; ++i) cps[i] = pa.centroid + pc1 * (lo + (hi - lo) * i / 3.0);
    return cps;
  };

  ControlPoints best = line_chain();
  if (static_cast<int>(pts.size()) >= cfg.min_points_full_fit) {
    // Chord-length parameterization along the PC1 ordering.
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return proj[a] < proj[b]; });
    std::vector<double> chord(pts.size(), 0.0);
    double acc = 0.0;
    for (std::size_t j = 1; j < order.size(); ++j) {
      acc += (pts[order[j]] - pts[order[j - 1]]).norm();
      chord[order[j]] = acc;
    }
    for (auto& c : chord) c /= acc;

    std::vector<double> linear(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) linear[j] = (proj[j] - lo) / (hi - lo);

    const int iters = cfg.max_parameter_corrections;
    Eigen::AlignedBox3d box;
    for (const auto& p : pts) box.extend(p);
    const double reach = 0.5 * box.diagonal().norm();
    // Stop refining once control points move less than this.
    const double tol = 1e-10 * reach;
    const auto axial = [&](const ControlPoints& c, std::vector<double>& t) {
      return axial_params(proj, c, pa.centroid, pc1, t);
    };
    const auto orthogonal = [&](const ControlPoints& c, std::vector<double>& t) {
      return orthogonal_params(pts, c, t);
    };

    // Axial family: the straight line, axial refinements from both
    // parameterizations, and tube-corrected continuations of those. The
    // smallest spread of point distances wins, which favours the middle of
    // a tube over chains pulled toward its visible side.
    FitResult chosen = evaluate(pts, best, reach);
    std::optional<FitResult> ortho;
    for (const auto* init : {&chord, &linear}) {
      const auto start = solve_control_points(pts, *init);
      if (!start) continue;
      const auto plain = refine(pts, *start, *init, iters, axial, false, tol);
      if (plain) {
        const FitResult p = evaluate(pts, *plain, reach);
        if (p.spread < chosen.spread) chosen = p;
        const auto tube = refine(pts, *plain, *init, iters, axial, true, tol);
        if (tube) {
          const FitResult t = evaluate(pts, *tube, reach);
          if (t.spread < chosen.spread) chosen = t;
        }
      }
      const auto o = refine(pts, *start, *init, iters, orthogonal, false, tol);
      if (o) {
        const FitResult e = evaluate(pts, *o, reach);
        if (!ortho || e.residual < ortho->residual) ortho = e;
      }
    }
    if (const auto pw = piecewise_chain(pts, order, pa.centroid)) {
      const FitResult p = evaluate(pts, *pw, reach);
      if (p.spread < chosen.spread) chosen = p;
      if (p.residual < kOrthogonalPreference * chosen.residual && p.spread <= chosen.spread) chosen = p;
    }
    // Orthogonal correction also handles chains that fold back along PC1,
    // but on tube surfaces it drifts toward chains that hug the points.
    // Take it only when it explains the points far better.
    if (ortho && ortho->residual < kOrthogonalPreference * chosen.residual && ortho->spread <= chosen.spread) {
      chosen = *ortho;
    }
    best = chosen.cps;
  }

  if ((best[0] - pa.centroid).dot(pc1) > (best[3] - pa.centroid).dot(pc1)) {
    std::reverse(best.begin(), best.end());
  }
  return SegmentChain::from_control_points(best, radius, cluster.confidence);
}

}  // namespace canopyskel
