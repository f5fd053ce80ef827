#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "canopyskel/geometry.hpp"
#include "canopyskel/kd_tree.hpp"
#include "oracles.hpp"

using namespace canopyskel;

namespace {

LineSegment seg(Point3 a, Point3 b) {
  LineSegment s;
  s.a = a;
  s.b = b;
  s.radius = 0.01;
  return s;
}

Point3 random_point(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

double total_length(std::span<const Point3> pts, const std::vector<Edge>& edges) {
  double w = 0.0;
  for (const auto& [a, b] : edges) w += (pts[a] - pts[b]).norm();
  return w;
}

}  // namespace

TEST(PointSegmentDistances, MidpointOnAxisIsZero) {
  const auto d = point_segment_distances({0.5, 0, 0}, seg({0, 0, 0}, {1, 0, 0}));
  EXPECT_EQ(d.axial, 0.0);
  EXPECT_EQ(d.radial, 0.0);
}

TEST(PointSegmentDistances, PerpendicularFromMidpointIsPureRadial) {
  const auto d = point_segment_distances({0.5, 0.1, 0}, seg({0, 0, 0}, {1, 0, 0}));
  EXPECT_EQ(d.axial, 0.0);
  EXPECT_NEAR(d.radial, 0.1, 1e-15);
}

TEST(PointSegmentDistances, BeyondEndpointIsPureAxial) {
  const Point3 p(1.25, 0, 0);
  const auto d = point_segment_distances(p, seg({0, 0, 0}, {1, 0, 0}));
  EXPECT_NEAR(d.axial, 0.25, 1e-15);
  EXPECT_NEAR(d.radial, 0.0, 1e-15);
  EXPECT_NEAR(oracle::sampled_segment_distance(p, {0, 0, 0}, {1, 0, 0}), 0.25, 1e-5);
}

TEST(PointSegmentDistances, ZeroLengthSegmentThrows) {
  EXPECT_THROW(point_segment_distances({0, 0, 0}, seg({1, 1, 1}, {1, 1, 1})), GeometryError);
}

TEST(PointSegmentDistances, InteriorProjectionHasZeroAxial) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> t(0.01, 0.99);
  for (int i = 0; i < 1000; ++i) {
    const Point3 a = random_point(rng);
    const Point3 b = random_point(rng);
    Point3 perp = (b - a).unitOrthogonal() * std::abs(random_point(rng).x());
    const Point3 p = a + t(rng) * (b - a) + perp;
    EXPECT_EQ(point_segment_distances(p, seg(a, b)).axial, 0.0);
  }
}

TEST(PointSegmentDistances, CombinedDistanceBoundsEuclidean) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 300; ++i) {
    const Point3 a = random_point(rng);
    const Point3 b = random_point(rng);
    const Point3 p = random_point(rng, -2, 2);
    const auto d = point_segment_distances(p, seg(a, b));
    const double combined = std::hypot(d.axial, d.radial);
    const double exact = point_to_segment_distance(p, a, b);
    EXPECT_GE(combined, exact - 1e-12);
    if (d.axial == 0.0) EXPECT_NEAR(combined, exact, 1e-12);
    // The sampled nearest point can only overestimate, by at most half a step.
    const double sampled = oracle::sampled_segment_distance(p, a, b, 20001);
    EXPECT_LE(exact, sampled + 1e-12);
    EXPECT_NEAR(exact, sampled, (b - a).norm() / 20000.0);
  }
}

TEST(EuclideanMst, EmptyInputThrows) {
  EXPECT_THROW(euclidean_mst({}), GeometryError);
}

TEST(EuclideanMst, SinglePointHasNoEdges) {
  const std::vector<Point3> pts{{1, 2, 3}};
  EXPECT_TRUE(euclidean_mst(pts).empty());
}

TEST(EuclideanMst, CollinearPoints) {
  const std::vector<Point3> pts{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  const auto edges = euclidean_mst(pts);
  ASSERT_EQ(edges.size(), 2u);
  EXPECT_EQ(edges[0], Edge(0, 1));
  EXPECT_EQ(edges[1], Edge(1, 2));
  EXPECT_DOUBLE_EQ(total_length(pts, edges), 2.0);
}

TEST(EuclideanMst, MatchesSpanningTreeEnumeration) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 7;
    std::vector<Point3> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(random_point(rng));
    const auto edges = euclidean_mst(pts);
    ASSERT_EQ(edges.size(), n - 1);
    EXPECT_NEAR(total_length(pts, edges), oracle::brute_force_mst_weight(pts), 1e-12);
  }
}

TEST(EuclideanMst, LargeInputIsSpanningTree) {
  std::mt19937_64 rng(14);
  std::vector<Point3> pts;
  for (int i = 0; i < 500; ++i) pts.push_back(random_point(rng));
  const auto edges = euclidean_mst(pts);
  ASSERT_EQ(edges.size(), pts.size() - 1);
  SkeletonGraph g(std::vector<SkeletonVertex>(pts.size()));
  for (const auto& [a, b] : edges) EXPECT_TRUE(g.add_edge(a, b));
  EXPECT_EQ(g.component_count(), 1u);
  EXPECT_TRUE(g.is_acyclic());
  for (std::size_t i = 1; i < edges.size(); ++i) EXPECT_LT(edges[i - 1], edges[i]);
  for (const auto& [a, b] : edges) EXPECT_LT(a, b);
}

TEST(SkeletonGraph, EdgeBookkeeping) {
  SkeletonGraph g(std::vector<SkeletonVertex>(4));
  EXPECT_TRUE(g.add_edge(0, 1));
  EXPECT_FALSE(g.add_edge(1, 0));
  EXPECT_FALSE(g.add_edge(2, 2));
  EXPECT_THROW(g.add_edge(0, 7), std::out_of_range);
  EXPECT_TRUE(g.has_edge(1, 0));
  EXPECT_EQ(g.component_count(), 3u);
  EXPECT_TRUE(g.add_edge(1, 2));
  EXPECT_TRUE(g.add_edge(2, 0));
  EXPECT_FALSE(g.is_acyclic());
  const auto deg = g.degrees();
  EXPECT_EQ(deg, (std::vector<std::size_t>{2, 2, 2, 0}));
}

TEST(UnionFind, CountsSets) {
  UnionFind uf(5);
  EXPECT_EQ(uf.set_count(), 5u);
  EXPECT_TRUE(uf.unite(0, 1));
  EXPECT_TRUE(uf.unite(3, 4));
  EXPECT_FALSE(uf.unite(1, 0));
  EXPECT_EQ(uf.set_count(), 3u);
  EXPECT_EQ(uf.find(0), uf.find(1));
  EXPECT_NE(uf.find(0), uf.find(3));
}

TEST(BranchCluster, ValidateRejectsBadInput) {
  BranchCluster c;
  EXPECT_THROW(c.validate(), GeometryError);
  c.points = {{0, 0, 0}};
  EXPECT_NO_THROW(c.validate());
  c.confidence = 0.0;
  EXPECT_THROW(c.validate(), GeometryError);
  c.confidence = 1.0;
  c.points.push_back({std::nan(""), 0, 0});
  EXPECT_THROW(c.validate(), GeometryError);
}

TEST(KdTree, NearestMatchesLinearScan) {
  std::mt19937_64 rng(15);
  std::vector<Point3> pts;
  for (int i = 0; i < 400; ++i) pts.push_back(random_point(rng));
  const KdTree tree(pts);
  for (int q = 0; q < 100; ++q) {
    const Point3 query = random_point(rng);
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
      const double da = (pts[a] - query).squaredNorm();
      const double db = (pts[b] - query).squaredNorm();
      return da != db ? da < db : a < b;
    });
    const auto got = tree.nearest(query, 7);
    EXPECT_EQ(got, std::vector<std::size_t>(order.begin(), order.begin() + 7));
    const auto skip = tree.nearest(query, 3, order[0]);
    EXPECT_EQ(skip, std::vector<std::size_t>(order.begin() + 1, order.begin() + 4));

    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if ((pts[i] - query).norm() <= 0.3) inside.push_back(i);
    }
    EXPECT_EQ(tree.within(query, 0.3), inside);
    EXPECT_EQ(tree.any_within(query, 0.3), !inside.empty());
  }
}

TEST(KdTree, TiesBreakBySmallerIndex) {
  const std::vector<Point3> pts{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, 0, 5}};
  const KdTree tree(pts);
  EXPECT_EQ(tree.nearest({0, 0, 0}, 3), (std::vector<std::size_t>{0, 1, 2}));
}
