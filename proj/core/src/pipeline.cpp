#include "canopyskel/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "canopyskel/io.hpp"
#include "canopyskel/segment_fit.hpp"
#include "canopyskel/synthgen.hpp"

namespace canopyskel {

namespace fs = std::filesystem;

const char* method_name(Method m) {
  switch (m) {
    case Method::Likelihood:
      return "likelihood";
    case Method::Mst:
      return "mst";
    case Method::Ftsem:
      return "ftsem";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods) {
    if (name == method_name(m)) return m;
  }
  throw ConfigError("unknown method '" + name + "' (expected likelihood, mst or ftsem)");
}

namespace {

LikelihoodGrid build_grid(std::span<const SegmentChain> chains, const PipelineConfig& cfg, unsigned jobs) {
  LikelihoodGrid grid(grid_spec_for(chains, cfg.voxel_size, cfg.kernel));
  accumulate(grid, chains, cfg.kernel, jobs);
  return grid;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(master ^ splitmix64(stream)) ^ a) ^ b);
}

std::string to_text(const auto& writer) {
  std::ostringstream ss;
  writer(ss);
  return ss.str();
}

}  // namespace

PipelineResult run_pipeline(std::span<const BranchCluster> clusters, const PipelineConfig& cfg, Method method,
                            unsigned jobs) {
  PipelineResult out;
  for (const auto& c : clusters) {
    try {
      c.validate();
      out.chains.push_back(fit_chain(c, cfg.fit));
    } catch (const GeometryError& e) {
      ++out.skipped_clusters;
      spdlog::warn("skipping cluster {}: {}", c.cluster_id, e.what());
    }
  }
  if (out.chains.empty()) return out;

  if (method == Method::Likelihood) out.grid = build_grid(out.chains, cfg, jobs);

  auto vertices = laplacian_smooth(sample_vertices(out.chains, cfg.voxel_size), cfg.smoothing, &out.smoothing);
  SkeletonGraph initial = build_initial_graph(vertices, cfg.voxel_size);
  out.initial_components = initial.component_count();

  switch (method) {
    case Method::Likelihood: {
      const LikelihoodGraph lg = build_likelihood_graph(*out.grid, cfg.path_search);
      out.skeleton = join_subgraphs(std::move(initial), lg, cfg.path_search, &out.joins);
      break;
    }
    case Method::Mst:
      out.skeleton = render_bridges(mst_baseline(std::move(vertices)), cfg.voxel_size);
      break;
    case Method::Ftsem:
      out.skeleton = render_bridges(ftsem_baseline(std::move(initial), cfg.ftsem, &out.links), cfg.voxel_size);
      break;
  }
  spdlog::debug("{}: {} chains, {} initial components, {} final", method_name(method), out.chains.size(),
                out.initial_components, out.skeleton.component_count());
  return out;
}

EvalReport score(const PipelineResult& result, const SkeletonGraph& gt, double radius) {
  if (result.skeleton.vertex_count() == 0) {
    EvalReport rep;
    rep.fn = gt.vertex_count();
    rep.finalize();
    return rep;
  }
  return label_vertices(result.skeleton, gt, radius);
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, jobs), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (i < failed_at) {
            failed_at = i;
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

std::vector<TreeCase> plan_dataset(const PipelineConfig& cfg) {
  std::vector<TreeCase> cases;
  const auto& gen = cfg.generator;
  for (int i = 0; i < gen.trees; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const std::string& species = gen.species[static_cast<std::size_t>(i) % gen.species.size()];
    for (int level : gen.density_levels) {
      TreeCase c;
      c.id = fmt::format("{}_{:02}_d{}", species, i, level);
      c.species = species;
      c.index = i;
      c.density = level;
      // Shared across levels: one topology seen under every foliage density,
      // with the occluders of a level a subset of those of the next.
      c.tree_seed = derive_seed(cfg.seed, 1, idx);
      c.occluder_seed = derive_seed(cfg.seed, 3, idx);
      c.occlusion_seed = derive_seed(cfg.seed, 2, idx, static_cast<std::uint64_t>(level));
      cases.push_back(std::move(c));
    }
  }
  return cases;
}

std::vector<fs::path> synth_dataset(const PipelineConfig& cfg, const fs::path& out_dir, unsigned jobs) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_file(out_dir / "config.json", dump_config(cfg));

  const auto cases = plan_dataset(cfg);
  if (cases.empty()) spdlog::warn("config requests no trees; writing an empty dataset");
  std::vector<fs::path> dirs(cases.size());
  parallel_for(cases.size(), jobs, [&](std::size_t i) {
    const TreeCase& tc = cases[i];
    TreeGenParams tp = TreeGenParams::preset(tc.species, tc.tree_seed);
    if (cfg.generator.depth > 0) tp.depth = cfg.generator.depth;
    const GroundTruthSkeleton gt = generate_tree(tp);

    OcclusionParams op = cfg.generator.occlusion;
    op.rng_seed = tc.occlusion_seed;
    op.occluder_seed = tc.occluder_seed;
    op.foliage_density_level = tc.density;
    const Observations obs = simulate_observations(gt, op);

    const fs::path dir = out_dir / tc.id;
    fs::create_directories(dir);
    write_file(dir / "clusters.txt", to_text([&](std::ostream& os) { write_clusters(os, obs.clusters); }));
    write_file(dir / "ground_truth.skel", to_text([&](std::ostream& os) { write_skeleton(os, gt.graph); }));
    write_file(dir / "occlusion_mask.txt", to_text([&](std::ostream& os) { write_mask(os, obs.occluded_mask); }));
    const nlohmann::json meta = {
        {"id", tc.id},
        {"species", tc.species},
        {"index", tc.index},
        {"density", tc.density},
        {"tree_seed", tc.tree_seed},
        {"occlusion_seed", tc.occlusion_seed},
        {"occluder_seed", tc.occluder_seed},
        {"occluders", obs.occluders.size()},
        {"clusters", obs.clusters.size()},
        {"branches", gt.branches.size()},
    };
    write_file(dir / "meta.json", meta.dump(2) + "\n");
    dirs[i] = dir;
    spdlog::info("synth {}: {} clusters, {} occluders", tc.id, obs.clusters.size(), obs.occluders.size());
  });
  return dirs;
}

PipelineResult skeletonize_tree(const PipelineConfig& cfg, const fs::path& tree_dir, Method method,
                                const SkeletonizeOptions& opts, unsigned jobs) {
  const auto clusters = read_file(tree_dir / "clusters.txt", read_clusters);
  PipelineResult res = run_pipeline(clusters, cfg, method, jobs);
  const std::string name = method_name(method);
  write_file(tree_dir / ("skeleton_" + name + ".skel"),
             to_text([&](std::ostream& os) { write_skeleton(os, res.skeleton); }));
  if (opts.volume) {
    write_file(tree_dir / ("volume_" + name + ".txt"),
               to_text([&](std::ostream& os) { write_volume(os, res.skeleton); }));
  }
  if (opts.grid_dump && !res.chains.empty()) {
    if (!res.grid) res.grid = build_grid(res.chains, cfg, jobs);
    write_file(tree_dir / "grid.txt", to_text([&](std::ostream& os) { write_grid(os, *res.grid); }));
  }
  return res;
}

std::vector<fs::path> find_tree_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  if (fs::exists(root / "clusters.txt")) return {root};
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "clusters.txt")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::vector<EvalRow> evaluate_dataset(const PipelineConfig& cfg, const fs::path& root,
                                      std::span<const Method> methods, unsigned jobs) {
  const auto dirs = find_tree_dirs(root);
  std::vector<std::string> missing;
  for (const auto& d : dirs) {
    if (!fs::exists(d / "ground_truth.skel")) missing.push_back((d / "ground_truth.skel").string());
    for (Method m : methods) {
      const fs::path p = d / (std::string("skeleton_") + method_name(m) + ".skel");
      if (!fs::exists(p)) missing.push_back(p.string());
    }
  }
  if (!missing.empty()) {
    std::string msg = fmt::format("{} required file(s) missing:", missing.size());
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }

  std::vector<EvalRow> rows(dirs.size() * methods.size());
  parallel_for(dirs.size(), jobs, [&](std::size_t i) {
    const fs::path& d = dirs[i];
    std::string species = "unknown";
    int density = 0;
    if (fs::exists(d / "meta.json")) {
      try {
        const auto meta = nlohmann::json::parse(slurp(d / "meta.json"));
        species = meta.at("species").get<std::string>();
        density = meta.at("density").get<int>();
      } catch (const nlohmann::json::exception& e) {
        throw DataError((d / "meta.json").string() + ": " + e.what());
      }
    }
    const SkeletonGraph gt = read_file(d / "ground_truth.skel", read_skeleton);
    if (gt.vertex_count() == 0) throw DataError((d / "ground_truth.skel").string() + ": empty ground truth");
    for (std::size_t k = 0; k < methods.size(); ++k) {
      const Method m = methods[k];
      PipelineResult res;
      res.skeleton =
          read_file(d / (std::string("skeleton_") + method_name(m) + ".skel"), read_skeleton);
      EvalRow& row = rows[i * methods.size() + k];
      row.tree_id = d.filename().string();
      row.tree_type = species;
      row.method = method_name(m);
      row.density = density;
      row.report = score(res, gt, cfg.eval_radius);
    }
  });
  return rows;
}

// ---------------------------------------------------------------------------

std::string render_plot_svg(std::span<const SummaryCell> cells) {
  // method -> density -> (sum, count) for each metric
  struct Acc {
    double p = 0, r = 0, o = 0;
    int n = 0;
  };
  std::map<std::string, std::map<int, Acc>> series;
  std::set<int> densities;
  for (const auto& c : cells) {
    auto& a = series[c.method][c.density];
    a.p += c.precision;
    a.r += c.recall;
    a.o += c.osr;
    ++a.n;
    densities.insert(c.density);
  }
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  const double pw = 260, ph = 200, left = 50, top = 40, gap = 40;
  const double width = left + 3 * (pw + gap);
  const double height = top + ph + 80;
  const int dmin = densities.empty() ? 1 : *densities.begin();
  const int dmax = densities.empty() ? 1 : *densities.rbegin();
  const auto xpos = [&](double panel, int d) {
    const double t = dmax == dmin ? 0.5 : static_cast<double>(d - dmin) / (dmax - dmin);
    return left + panel * (pw + gap) + 10 + t * (pw - 20);
  };
  const auto ypos = [&](double v) { return top + ph - std::clamp(v, 0.0, 1.0) * ph; };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      width, height);
  const char* titles[] = {"precision", "recall", "OSR"};
  for (int panel = 0; panel < 3; ++panel) {
    const double x0 = left + panel * (pw + gap);
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", x0,
                       top, pw, ph);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n", x0 + pw / 2,
                       top - 12, titles[panel]);
    for (int tick = 0; tick <= 4; ++tick) {
      const double v = tick / 4.0;
      svg += fmt::format("<line x1=\"{}\" x2=\"{}\" y1=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n", x0, x0 + pw,
                         ypos(v), ypos(v));
      svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.2f}</text>\n", x0 - 4, ypos(v) + 4, v);
    }
    for (int d : densities) {
      svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", xpos(panel, d),
                         top + ph + 15, d);
    }
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">foliage density</text>\n", x0 + pw / 2,
                       top + ph + 32);
    std::size_t color = 0;
    for (const auto& [method, by_d] : series) {
      std::string pts;
      for (const auto& [d, a] : by_d) {
        const double v = (panel == 0 ? a.p : panel == 1 ? a.r : a.o) / a.n;
        pts += fmt::format("{:.2f},{:.2f} ", xpos(panel, d), ypos(v));
        svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", xpos(panel, d), ypos(v),
                           palette[color % 5]);
      }
      svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", pts,
                         palette[color % 5]);
      ++color;
    }
  }
  std::size_t color = 0;
  for (const auto& [method, by_d] : series) {
    const double lx = left + static_cast<double>(color) * 120;
    const double ly = top + ph + 55;
    svg += fmt::format("<line x1=\"{}\" x2=\"{}\" y1=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"3\"/>\n", lx,
                       lx + 20, ly, ly, palette[color % 5]);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", lx + 26, ly + 4, method);
    ++color;
  }
  svg += "</svg>\n";
  return svg;
}

void configure_logging(const std::string& fallback) {
  static const std::set<std::string> names{"trace", "debug", "info", "warn", "error", "critical", "off"};
  if (!spdlog::get("canopyskel")) {
    auto logger = spdlog::stderr_color_mt("canopyskel");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  }
  std::string level = fallback;
  if (const char* env = std::getenv("CANOPYSKEL_LOG"); env && *env) {
    if (names.contains(env)) {
      level = env;
    } else {
      spdlog::warn("ignoring unknown CANOPYSKEL_LOG value '{}'", env);
    }
  }
  spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace canopyskel
