#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "canopyskel/baselines.hpp"
#include "canopyskel/evaluation.hpp"
#include "canopyskel/geometry.hpp"
#include "canopyskel/likelihood_map.hpp"
#include "canopyskel/pipeline.hpp"
#include "canopyskel/segment_fit.hpp"
#include "canopyskel/skeleton.hpp"
#include "canopyskel/synthgen.hpp"

using namespace canopyskel;

namespace {

struct Scene {
  GroundTruthSkeleton gt;
  Observations obs;
  std::vector<SegmentChain> chains;
};

const Scene& scene() {
  static const Scene s = [] {
    Scene out;
    out.gt = generate_tree(TreeGenParams::preset("oak", 3));
    OcclusionParams op;
    op.foliage_density_level = 3;
    out.obs = simulate_observations(out.gt, op);
    for (const auto& c : out.obs.clusters) out.chains.push_back(fit_chain(c, FitConfig{}));
    return out;
  }();
  return s;
}

BranchCluster noisy_tube(std::size_t n) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.002);
  BranchCluster c;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 0.25 * u(rng);
    const double a = 6.283185307179586 * u(rng);
    c.points.emplace_back(0.03 * std::cos(a) + noise(rng), 0.03 * std::sin(a) + noise(rng), t + 0.2 * t * t);
  }
  return c;
}

}  // namespace

static void BM_FitChain(benchmark::State& state) {
  const auto cluster = noisy_tube(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_chain(cluster, FitConfig{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitChain)->Arg(100)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

static void BM_Accumulate(benchmark::State& state) {
  const auto& s = scene();
  const auto spec = grid_spec_for(s.chains, 0.02);
  for (auto _ : state) {
    LikelihoodGrid grid(spec);
    accumulate(grid, s.chains);
    benchmark::DoNotOptimize(grid.stored_count());
  }
  state.counters["chains"] = static_cast<double>(s.chains.size());
}
BENCHMARK(BM_Accumulate)->Unit(benchmark::kMillisecond);

static void BM_LaplacianSmooth(benchmark::State& state) {
  const auto vertices = sample_vertices(scene().chains, 0.02);
  for (auto _ : state) benchmark::DoNotOptimize(laplacian_smooth(vertices, SmoothingConfig{}));
  state.counters["vertices"] = static_cast<double>(vertices.size());
}
BENCHMARK(BM_LaplacianSmooth)->Unit(benchmark::kMillisecond);

static void BM_EuclideanMst(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point3> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = Point3(u(rng), u(rng), u(rng));
  for (auto _ : state) benchmark::DoNotOptimize(euclidean_mst(pts));
}
BENCHMARK(BM_EuclideanMst)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_JoinSubgraphs(benchmark::State& state) {
  const auto& s = scene();
  const PipelineConfig cfg;
  LikelihoodGrid grid(grid_spec_for(s.chains, cfg.voxel_size));
  accumulate(grid, s.chains, cfg.kernel);
  const LikelihoodGraph lg(grid, cfg.path_search.p_min);
  const auto initial =
      build_initial_graph(laplacian_smooth(sample_vertices(s.chains, cfg.voxel_size), cfg.smoothing), cfg.voxel_size);
  for (auto _ : state) benchmark::DoNotOptimize(join_subgraphs(initial, lg, cfg.path_search));
  state.counters["fragments"] = static_cast<double>(initial.component_count());
}
BENCHMARK(BM_JoinSubgraphs)->Unit(benchmark::kMillisecond);

static void BM_LabelVertices(benchmark::State& state) {
  const auto& s = scene();
  const auto res = run_pipeline(s.obs.clusters, PipelineConfig{}, Method::Likelihood);
  for (auto _ : state) benchmark::DoNotOptimize(label_vertices(res.skeleton, s.gt.graph));
  state.counters["vertices"] = static_cast<double>(res.skeleton.vertex_count());
}
BENCHMARK(BM_LabelVertices)->Unit(benchmark::kMillisecond);

static void BM_RunPipeline(benchmark::State& state) {
  const auto& s = scene();
  const Method m = kAllMethods[state.range(0)];
  state.SetLabel(method_name(m));
  for (auto _ : state) benchmark::DoNotOptimize(run_pipeline(s.obs.clusters, PipelineConfig{}, m));
}
BENCHMARK(BM_RunPipeline)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
