#include "canopyskel/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <tuple>
#include <unordered_map>

#include "canopyskel/kd_tree.hpp"

namespace canopyskel {

void SmoothingConfig::validate() const {
  if (neighbors_k < 1) throw std::invalid_argument("smoothing neighbors_k must be >= 1");
  if (!(convergence_threshold > 0.0)) {
    throw std::invalid_argument("smoothing convergence_threshold must be > 0");
  }
  if (max_iterations < 1) throw std::invalid_argument("smoothing max_iterations must be >= 1");
}

void PathSearchConfig::validate() const {
  if (!(p_min > 0.0 && p_min < 1.0)) throw std::invalid_argument("p_min must be in (0, 1)");
  if (!(max_path_cost > 0.0)) throw std::invalid_argument("max_path_cost must be > 0");
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

constexpr double kMergeDistance = 1e-9;

/// Point set with a hashed lattice for merging near-duplicates.
class DedupSet {
 public:
  /// Returns true when p was inserted (no existing point within kMergeDistance).
  bool insert(const Point3& p) {
    const auto c = cell(p);
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const auto it = cells_.find(pack(c[0] + dx, c[1] + dy, c[2] + dz));
          if (it == cells_.end()) continue;
          for (const auto& q : it->second) {
            if ((q - p).norm() < kMergeDistance) return false;
          }
        }
      }
    }
    cells_[pack(c[0], c[1], c[2])].push_back(p);
    return true;
  }

 private:
  static constexpr double kCell = 1e-7;
  static std::array<std::int64_t, 3> cell(const Point3& p) {
    return {static_cast<std::int64_t>(std::floor(p.x() / kCell)),
            static_cast<std::int64_t>(std::floor(p.y() / kCell)),
            static_cast<std::int64_t>(std::floor(p.z() / kCell))};
  }
  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    const auto h = [](std::int64_t v) { return static_cast<std::uint64_t>(v) * 0x9E3779B97F4A7C15ull; };
    return h(x) ^ (h(y) >> 1) ^ (h(z) << 1) ^ static_cast<std::uint64_t>(z);
  }
  std::unordered_map<std::uint64_t, std::vector<Point3>> cells_;
};

}  // namespace

std::vector<SkeletonVertex> sample_vertices(std::span<const SegmentChain> chains, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("sample_vertices: spacing must be > 0");
  std::vector<SkeletonVertex> out;
  DedupSet seen;
  auto emit = [&](const Point3& p, double radius) {
    if (seen.insert(p)) out.push_back({p, radius, Provenance::Observed});
  };
  for (const auto& chain : chains) {
    for (const auto& seg : chain.segments) {
      const double len = seg.length();
      emit(seg.a, chain.radius);
      if (!(len > 0.0)) continue;
      const Point3 unit = (seg.b - seg.a) / len;
      const auto steps = static_cast<long>(std::floor(len / spacing + 1e-9));
      for (long i = 1; i <= steps; ++i) emit(seg.a + unit * (spacing * static_cast<double>(i)), chain.radius);
      emit(seg.b, chain.radius);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Smoothing

std::vector<SkeletonVertex> laplacian_smooth(std::vector<SkeletonVertex> vertices,
                                             const SmoothingConfig& cfg, SmoothingStats* stats) {
  cfg.validate();
  SmoothingStats local;
  const std::size_t n = vertices.size();
  if (n <= 1) {
    if (stats) *stats = local;
    return vertices;
  }
  std::vector<Point3> current(n);
  for (std::size_t i = 0; i < n; ++i) current[i] = vertices[i].position;
  std::vector<Point3> next(n);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.neighbors_k), n - 1);

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const KdTree tree(current);
    double displacement = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto nbrs = tree.nearest(current[i], k, i);
      Point3 mean = Point3::Zero();
      for (auto j : nbrs) mean += current[j];
      mean /= static_cast<double>(nbrs.size());
      next[i] = mean;
      displacement += (mean - current[i]).norm();
    }
    current.swap(next);
    local.iterations = iter + 1;
    local.last_displacement = displacement;
    if (displacement < cfg.convergence_threshold) break;
  }
  for (std::size_t i = 0; i < n; ++i) vertices[i].position = current[i];
  if (stats) *stats = local;
  return vertices;
}

// ---------------------------------------------------------------------------
// Initial forest

SkeletonGraph build_initial_graph(std::vector<SkeletonVertex> vertices, double voxel_size) {
  if (!(voxel_size > 0.0)) throw std::invalid_argument("build_initial_graph: voxel_size must be > 0");
  SkeletonGraph graph(std::move(vertices));
  if (graph.vertex_count() == 0) return graph;
  std::vector<Point3> pts;
  pts.reserve(graph.vertex_count());
  for (const auto& v : graph.vertices()) pts.push_back(v.position);
  // Spacing equal to the voxel size must survive rounding in the sampler.
  const double limit = voxel_size * (1.0 + 1e-9);
  for (const auto& [u, v] : euclidean_mst(pts)) {
    if ((pts[u] - pts[v]).norm() <= limit) graph.add_edge(u, v);
  }
  return graph;
}

// ---------------------------------------------------------------------------
// Likelihood graph

LikelihoodGraph::LikelihoodGraph(const LikelihoodGrid& grid, double p_min) : spec_(grid.spec()) {
  for (const auto& [key, p] : grid.raw_cells()) {
    if (p >= p_min) keys_.push_back(key);
  }
  std::sort(keys_.begin(), keys_.end());
  probs_.reserve(keys_.size());
  index_.reserve(keys_.size() * 2);
  for (std::uint32_t i = 0; i < keys_.size(); ++i) {
    index_.emplace(keys_[i], i);
    probs_.push_back(grid.raw_cells().at(keys_[i]));
  }
  offsets_.assign(1, 0);
  offsets_.reserve(keys_.size() + 1);
  for (std::uint32_t i = 0; i < keys_.size(); ++i) {
    const VoxelIndex v = spec_.unlinear(keys_[i]);
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          if (const auto j = node_of({v.x + dx, v.y + dy, v.z + dz})) neighbors_.push_back(*j);
        }
      }
    }
    std::sort(neighbors_.begin() + offsets_.back(), neighbors_.end());
    offsets_.push_back(static_cast<std::uint32_t>(neighbors_.size()));
  }
}

std::optional<std::uint32_t> LikelihoodGraph::node_of(const VoxelIndex& v) const {
  if (!spec_.contains(v)) return std::nullopt;
  const auto it = index_.find(spec_.linear(v));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> LikelihoodGraph::node_at(const Point3& p) const {
  return node_of(spec_.voxel_of(p));
}

double LikelihoodGraph::edge_cost(std::uint32_t u, std::uint32_t v) const {
  return std::max(0.0, -std::log(0.5 * (probs_[u] + probs_[v])));
}

LikelihoodGraph build_likelihood_graph(const LikelihoodGrid& grid, const PathSearchConfig& cfg) {
  cfg.validate();
  return LikelihoodGraph(grid, cfg.p_min);
}

// ---------------------------------------------------------------------------
// Shortest paths

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
constexpr double kInf = std::numeric_limits<double>::infinity();

struct HeapEntry {
  double dist;
  std::uint32_t hops;
  std::uint32_t node;
  friend bool operator>(const HeapEntry& a, const HeapEntry& b) {
    return std::tie(a.dist, a.hops, a.node) > std::tie(b.dist, b.hops, b.node);
  }
};

using MinHeap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>>;

std::vector<std::uint32_t> unique_nodes(std::span<const Point3> pts, const LikelihoodGraph& g) {
  std::vector<std::uint32_t> out;
  for (const auto& p : pts) {
    if (const auto n = g.node_at(p)) out.push_back(*n);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::optional<VoxelPath> min_cost_path(std::span<const Point3> from, std::span<const Point3> to,
                                       const LikelihoodGraph& graph) {
  const auto sources = unique_nodes(from, graph);
  const auto targets = unique_nodes(to, graph);
  if (sources.empty() || targets.empty()) return std::nullopt;

  std::vector<std::uint32_t> shared;
  std::set_intersection(sources.begin(), sources.end(), targets.begin(), targets.end(),
                        std::back_inserter(shared));
  if (!shared.empty()) return VoxelPath{{graph.voxel(shared.front())}, 0.0};

  const std::size_t n = graph.node_count();
  std::vector<double> dist(n, kInf);
  std::vector<std::uint32_t> hops(n, kNone);
  std::vector<std::uint32_t> pred(n, kNone);
  std::vector<char> is_target(n, 0);
  for (auto t : targets) is_target[t] = 1;

  MinHeap heap;
  for (auto s : sources) {
    dist[s] = 0.0;
    hops[s] = 1;
    heap.push({0.0, 1, s});
  }
  while (!heap.empty()) {
    const HeapEntry top = heap.top();
    heap.pop();
    if (top.dist != dist[top.node] || top.hops != hops[top.node]) continue;
    const std::uint32_t u = top.node;
    if (is_target[u]) {
      VoxelPath path;
      path.cost = dist[u];
      for (std::uint32_t x = u; x != kNone; x = pred[x]) path.voxels.push_back(graph.voxel(x));
      std::reverse(path.voxels.begin(), path.voxels.end());
      return path;
    }
    for (const auto v : graph.neighbors(u)) {
      const double nd = dist[u] + graph.edge_cost(u, v);
      const std::uint32_t nh = hops[u] + 1;
      const bool better = std::tie(nd, nh) < std::tie(dist[v], hops[v]) ||
                          (nd == dist[v] && nh == hops[v] && u < pred[v]);
      if (better) {
        dist[v] = nd;
        hops[v] = nh;
        pred[v] = u;
        heap.push({nd, nh, v});
      }
    }
  }
  return std::nullopt;
}

namespace {

struct BoundaryEntry {
  double cost;
  std::uint32_t hops;
  std::uint32_t u;
  std::uint32_t v;
  std::uint32_t u_version;
  std::uint32_t v_version;
  friend bool operator>(const BoundaryEntry& a, const BoundaryEntry& b) {
    return std::tie(a.cost, a.hops, a.u, a.v) > std::tie(b.cost, b.hops, b.u, b.v);
  }
};

class Joiner {
 public:
  Joiner(SkeletonGraph forest, const LikelihoodGraph& graph, const PathSearchConfig& cfg)
      : skel_(std::move(forest)),
        graph_(graph),
        cfg_(cfg),
        sets_(0),
        dist_(graph.node_count(), kInf),
        hops_(graph.node_count(), kNone),
        pred_(graph.node_count(), kNone),
        source_(graph.node_count(), static_cast<std::size_t>(-1)),
        version_(graph.node_count(), 0) {}

  SkeletonGraph run(JoinStats& stats) {
    // Upper bound: every node may receive one path vertex.
    sets_ = UnionFind(skel_.vertex_count() + graph_.node_count());
    for (const auto& [u, v] : skel_.edges()) sets_.unite(u, v);

    seed_terminals(stats);
    propagate();
    for (std::uint32_t u = 0; u < graph_.node_count(); ++u) push_boundary(u);

    while (!boundary_.empty()) {
      const BoundaryEntry top = boundary_.top();
      boundary_.pop();
      if (top.u_version != version_[top.u] || top.v_version != version_[top.v]) continue;
      if (sets_.find(source_[top.u]) == sets_.find(source_[top.v])) continue;
      if (top.cost > cfg_.max_path_cost) break;
      join_along(top, stats);
    }
    return std::move(skel_);
  }

 private:
  // Terminal voxels: graph nodes that contain skeleton vertices. Components
  // sharing a voxel are joined at zero cost first.
  void seed_terminals(JoinStats& stats) {
    std::map<std::uint32_t, std::vector<std::size_t>> by_node;
    for (std::size_t i = 0; i < skel_.vertex_count(); ++i) {
      if (const auto n = graph_.node_at(skel_.vertices()[i].position)) by_node[*n].push_back(i);
    }
    for (const auto& [node, verts] : by_node) {
      const Point3 c = graph_.spec().center(graph_.voxel(node));
      auto closest = [&](std::span<const std::size_t> ids) {
        return *std::min_element(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
          const double da = (skel_.vertices()[a].position - c).squaredNorm();
          const double db = (skel_.vertices()[b].position - c).squaredNorm();
          return std::tie(da, a) < std::tie(db, b);
        });
      };
      // Representative per component present in this voxel.
      std::map<std::size_t, std::vector<std::size_t>> per_comp;
      for (auto v : verts) per_comp[sets_.find(v)].push_back(v);
      if (per_comp.size() > 1) {
        std::vector<std::size_t> reps;
        for (const auto& [root, ids] : per_comp) reps.push_back(closest(ids));
        std::sort(reps.begin(), reps.end());
        for (std::size_t r = 1; r < reps.size(); ++r) {
          if (sets_.unite(reps[0], reps[r])) {
            skel_.add_edge(reps[0], reps[r]);
            ++stats.joins;
            stats.join_costs.push_back(0.0);
          }
        }
      }
      make_terminal(node, closest(verts));
    }
  }

  void make_terminal(std::uint32_t node, std::size_t vertex) {
    dist_[node] = 0.0;
    hops_[node] = 1;
    pred_[node] = kNone;
    source_[node] = vertex;
    ++version_[node];
    heap_.push({0.0, 1, node});
  }

  // Dijkstra from whatever is queued; distances only ever decrease.
  void propagate() {
    while (!heap_.empty()) {
      const HeapEntry top = heap_.top();
      heap_.pop();
      const std::uint32_t u = top.node;
      if (top.dist != dist_[u] || top.hops != hops_[u]) continue;
      for (const auto v : graph_.neighbors(u)) {
        const double nd = dist_[u] + graph_.edge_cost(u, v);
        const std::uint32_t nh = hops_[u] + 1;
        if (std::tie(nd, nh) < std::tie(dist_[v], hops_[v])) {
          dist_[v] = nd;
          hops_[v] = nh;
          pred_[v] = u;
          source_[v] = source_[u];
          ++version_[v];
          heap_.push({nd, nh, v});
          touched_.push_back(v);
        }
      }
    }
  }

  void push_boundary(std::uint32_t u) {
    if (dist_[u] == kInf) return;
    const std::size_t su = sets_.find(source_[u]);
    for (const auto v : graph_.neighbors(u)) {
      if (dist_[v] == kInf || sets_.find(source_[v]) == su) continue;
      const std::uint32_t a = std::min(u, v);
      const std::uint32_t b = std::max(u, v);
      boundary_.push({dist_[a] + graph_.edge_cost(a, b) + dist_[b], hops_[a] + hops_[b], a, b,
                      version_[a], version_[b]});
    }
  }

  std::vector<std::uint32_t> trace(std::uint32_t node) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t x = node; x != kNone; x = pred_[x]) out.push_back(x);
    return out;  // node ... terminal
  }

  void join_along(const BoundaryEntry& e, JoinStats& stats) {
    auto left = trace(e.u);
    std::reverse(left.begin(), left.end());
    const auto right = trace(e.v);
    std::vector<std::uint32_t> path = std::move(left);
    path.insert(path.end(), right.begin(), right.end());

    const std::size_t from = source_[e.u];
    const std::size_t to = source_[e.v];
    const double r0 = skel_.vertices()[from].radius;
    const double r1 = skel_.vertices()[to].radius;
    const double span = static_cast<double>(path.size() - 1);

    std::size_t prev = from;
    std::vector<std::uint32_t> new_terminals;
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      const double t = static_cast<double>(i) / span;
      const std::size_t id = skel_.add_vertex(
          {graph_.spec().center(graph_.voxel(path[i])), r0 + (r1 - r0) * t, Provenance::PathDerived});
      skel_.add_edge(prev, id);
      sets_.unite(prev, id);
      prev = id;
      new_terminals.push_back(path[i]);
      ++stats.path_vertices;
    }
    skel_.add_edge(prev, to);
    sets_.unite(prev, to);
    ++stats.joins;
    stats.join_costs.push_back(e.cost);

    touched_.clear();
    for (std::size_t i = 0; i < new_terminals.size(); ++i) {
      make_terminal(new_terminals[i], skel_.vertex_count() - new_terminals.size() + i);
      touched_.push_back(new_terminals[i]);
    }
    propagate();
    for (const auto u : touched_) push_boundary(u);
  }

  SkeletonGraph skel_;
  const LikelihoodGraph& graph_;
  PathSearchConfig cfg_;
  UnionFind sets_;
  std::vector<double> dist_;
  std::vector<std::uint32_t> hops_;
  std::vector<std::uint32_t> pred_;
  std::vector<std::size_t> source_;
  std::vector<std::uint32_t> version_;
  MinHeap heap_;
  std::priority_queue<BoundaryEntry, std::vector<BoundaryEntry>, std::greater<>> boundary_;
  std::vector<std::uint32_t> touched_;
};

}  // namespace

SkeletonGraph join_subgraphs(SkeletonGraph forest, const LikelihoodGraph& graph,
                             const PathSearchConfig& cfg, JoinStats* stats) {
  cfg.validate();
  JoinStats local;
  if (!forest.is_acyclic()) throw GeometryError("join_subgraphs: initial graph is not a forest");
  if (graph.empty() || forest.vertex_count() == 0) {
    if (stats) *stats = local;
    return forest;
  }
  Joiner joiner(std::move(forest), graph, cfg);
  SkeletonGraph out = joiner.run(local);
  if (stats) *stats = std::move(local);
  return out;
}

}  // namespace canopyskel
