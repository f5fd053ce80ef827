#include "canopyskel/kd_tree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <utility>

namespace canopyskel {

namespace {
constexpr std::size_t kLeafSize = 8;
}

KdTree::KdTree(std::span<const Point3> points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Point3 lo = points_[order_[begin]];
  Point3 hi = lo;
  for (std::size_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as leaf

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<std::size_t> KdTree::nearest(const Point3& query, std::size_t k,
                                         std::size_t exclude) const {
  std::vector<std::size_t> out;
  if (k == 0 || nodes_.empty()) return out;

  using Entry = std::pair<double, std::size_t>;  // (squared distance, index)
  std::priority_queue<Entry> heap;                // max-heap on (d2, index)

  auto visit = [&](auto&& self, std::size_t node_id) -> void {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if (idx == exclude) continue;
        const Entry e{(points_[idx] - query).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
      return;
    }
    const double diff = query[node.axis] - node.split;
    const std::size_t first = diff < 0.0 ? node.left : node.right;
    const std::size_t second = diff < 0.0 ? node.right : node.left;
    self(self, first);
    if (heap.size() < k || diff * diff <= heap.top().first) self(self, second);
  };
  visit(visit, 0);

  out.resize(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

std::vector<std::size_t> KdTree::within(const Point3& query, double radius) const {
  std::vector<std::size_t> out;
  if (nodes_.empty()) return out;
  const double r2 = radius * radius;
  auto visit = [&](auto&& self, std::size_t node_id) -> void {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        if ((points_[order_[i]] - query).squaredNorm() <= r2) out.push_back(order_[i]);
      }
      return;
    }
    const double diff = query[node.axis] - node.split;
    if (diff <= radius) self(self, node.left);
    if (diff >= -radius) self(self, node.right);
  };
  visit(visit, 0);
  std::sort(out.begin(), out.end());
  return out;
}

bool KdTree::any_within(const Point3& query, double radius) const {
  if (nodes_.empty()) return false;
  const double r2 = radius * radius;
  auto visit = [&](auto&& self, std::size_t node_id) -> bool {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        if ((points_[order_[i]] - query).squaredNorm() <= r2) return true;
      }
      return false;
    }
    const double diff = query[node.axis] - node.split;
    const std::size_t first = diff < 0.0 ? node.left : node.right;
    const std::size_t second = diff < 0.0 ? node.right : node.left;
    if (self(self, first)) return true;
    return diff * diff <= r2 && self(self, second);
  };
  return visit(visit, 0);
}

}  // namespace canopyskel
