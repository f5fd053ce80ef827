// canopyskel: generate synthetic occluded trees, extract skeletons, score them.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "canopyskel/config.hpp"
#include "canopyskel/evaluation.hpp"
#include "canopyskel/io.hpp"
#include "canopyskel/pipeline.hpp"

namespace fs = std::filesystem;
using namespace canopyskel;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> voxel_size;
  unsigned jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
  cmd->add_option("--voxel-size", c.voxel_size, "Voxel size in metres (overrides the config)");
  cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.voxel_size) cfg.voxel_size = *c.voxel_size;
  cfg.validate();
  return cfg;
}

std::vector<Method> resolve_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) {
    if (n == "all") return {std::begin(kAllMethods), std::end(kAllMethods)};
    const Method m = parse_method(n);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) out.assign(std::begin(kAllMethods), std::end(kAllMethods));
  return out;
}

void skeletonize_all(const PipelineConfig& cfg, const std::vector<fs::path>& dirs, const std::vector<Method>& methods,
                     const SkeletonizeOptions& opts, unsigned jobs) {
  const std::size_t n = dirs.size() * methods.size();
  // A single tree gets the threads for grid accumulation instead.
  const unsigned inner = dirs.size() == 1 ? jobs : 1;
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto& dir = dirs[i / methods.size()];
    const Method m = methods[i % methods.size()];
    const auto res = skeletonize_tree(cfg, dir, m, opts, inner);
    spdlog::info("{} [{}]: {} vertices, {} edges, {} -> {} components", dir.filename().string(), method_name(m),
                 res.skeleton.vertex_count(), res.skeleton.edge_count(), res.initial_components,
                 res.skeleton.component_count());
  });
}

void report(const std::vector<EvalRow>& rows, const fs::path& csv_path, const std::string& plot_path) {
  std::ostringstream csv;
  write_csv(csv, rows);
  write_file(csv_path, csv.str());
  if (rows.empty()) {
    spdlog::warn("no trees scored");
    return;
  }
  const auto cells = aggregate(rows);
  write_summary_table(std::cout, cells);
  if (!plot_path.empty()) write_file(plot_path, render_plot_svg(cells));
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging("info");
  CLI::App app{"Skeleton extraction for occluded tree canopies"};
  app.require_subcommand(1);

  Common common;
  fs::path out_dir;
  std::optional<int> trees;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, common);
  synth->add_option("out_dir", out_dir, "Output dataset directory")->required();
  synth->add_option("--trees", trees, "Number of tree topologies (overrides the config)")
      ->check(CLI::NonNegativeNumber);

  fs::path target;
  std::vector<std::string> method_names;
  SkeletonizeOptions opts;
  auto* skel = app.add_subcommand("skeletonize", "Extract skeletons for one tree or a whole dataset");
  add_common(skel, common);
  skel->add_option("path", target, "Tree directory or dataset directory")->required()->check(CLI::ExistingDirectory);
  skel->add_option("--method", method_names, "likelihood, mst, ftsem or all (repeatable)");
  skel->add_flag("--volume", opts.volume, "Also write the sphere-per-vertex volume file");
  skel->add_flag("--grid-dump", opts.grid_dump, "Also write the likelihood grid");

  std::string csv_name = "results.csv";
  std::string plot_path;
  auto* eval = app.add_subcommand("evaluate", "Score skeletons against ground truth");
  add_common(eval, common);
  eval->add_option("dataset_dir", target, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--method", method_names, "Methods to score (repeatable, default all)");
  eval->add_option("--csv", csv_name, "CSV file name, relative to the dataset directory");
  eval->add_option("--plot", plot_path, "Write an SVG plot of the metrics vs density");

  auto* sweep = app.add_subcommand("sweep", "synth, skeletonize (all methods) and evaluate in one go");
  add_common(sweep, common);
  sweep->add_option("out_dir", out_dir, "Output dataset directory")->required();
  sweep->add_option("--trees", trees, "Number of tree topologies (overrides the config)")
      ->check(CLI::NonNegativeNumber);
  sweep->add_option("--plot", plot_path, "Write an SVG plot of the metrics vs density");

  fs::path convert_in;
  fs::path convert_out;
  auto* convert = app.add_subcommand("convert", "Convert between clusters.txt and ASCII PLY");
  convert->add_option("input", convert_in, "Input file (.txt clusters or .ply)")->required()->check(CLI::ExistingFile);
  convert->add_option("output", convert_out, "Output file (.txt clusters or .ply)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth || *sweep) {
      PipelineConfig cfg = resolve(common);
      if (trees) cfg.generator.trees = *trees;
      const auto dirs = synth_dataset(cfg, out_dir, common.jobs);
      spdlog::info("wrote {} tree directories to {}", dirs.size(), out_dir.string());
      if (*sweep) {
        const std::vector<Method> methods(std::begin(kAllMethods), std::end(kAllMethods));
        skeletonize_all(cfg, dirs, methods, {}, common.jobs);
        report(evaluate_dataset(cfg, out_dir, methods, common.jobs), out_dir / "results.csv", plot_path);
      }
    } else if (*skel) {
      const PipelineConfig cfg = resolve(common);
      const auto methods = resolve_methods(method_names);
      const auto dirs = find_tree_dirs(target);
      if (dirs.empty()) throw DataError("no tree directories (with clusters.txt) under " + target.string());
      skeletonize_all(cfg, dirs, methods, opts, common.jobs);
    } else if (*eval) {
      const PipelineConfig cfg = resolve(common);
      const auto methods = resolve_methods(method_names);
      report(evaluate_dataset(cfg, target, methods, common.jobs), target / csv_name, plot_path);
    } else if (*convert) {
      const auto is_ply = [](const fs::path& p) { return p.extension() == ".ply"; };
      const auto clusters = is_ply(convert_in) ? read_file(convert_in, read_ply) : read_file(convert_in, read_clusters);
      std::ostringstream os;
      if (is_ply(convert_out)) {
        write_ply(os, clusters);
      } else {
        write_clusters(os, clusters);
      }
      write_file(convert_out, os.str());
    }
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const GeometryError& e) {
    spdlog::error("invalid geometry: {}", e.what());
    return kData;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kInternal;
  }
  return kOk;
}
