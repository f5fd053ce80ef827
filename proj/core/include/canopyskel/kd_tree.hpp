#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "canopyskel/geometry.hpp"

namespace canopyskel {

/// Static 3D k-d tree over a borrowed point array. Queries are exact.
/// The points must outlive the tree and must not be modified.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points);

  /// Indices of the k nearest points to `query`, nearest first. Ties are
  /// broken by smaller index. `exclude` (if < size) is skipped.
  std::vector<std::size_t> nearest(const Point3& query, std::size_t k,
                                   std::size_t exclude = static_cast<std::size_t>(-1)) const;

  /// All indices within `radius` (inclusive), in ascending index order.
  std::vector<std::size_t> within(const Point3& query, double radius) const;

  /// True when at least one point lies within `radius` (inclusive).
  bool any_within(const Point3& query, double radius) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end);

  std::span<const Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace canopyskel
