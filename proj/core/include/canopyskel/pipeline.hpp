#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "canopyskel/baselines.hpp"
#include "canopyskel/config.hpp"
#include "canopyskel/evaluation.hpp"
#include "canopyskel/likelihood_map.hpp"
#include "canopyskel/skeleton.hpp"

namespace canopyskel {

/// Input data is missing or inconsistent (beyond a single file's syntax).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { Likelihood, Mst, Ftsem };

const char* method_name(Method m);
/// Throws ConfigError for unknown names.
Method parse_method(const std::string& name);
inline constexpr Method kAllMethods[] = {Method::Likelihood, Method::Mst, Method::Ftsem};

struct PipelineResult {
  SkeletonGraph skeleton;
  std::vector<SegmentChain> chains;
  std::size_t skipped_clusters = 0;
  std::size_t initial_components = 0;
  SmoothingStats smoothing;
  /// Likelihood grid; only built for Method::Likelihood.
  std::optional<LikelihoodGrid> grid;
  JoinStats joins;
  std::vector<BreakpointLink> links;
};

/// fit -> accumulate -> sample -> smooth -> initial forest -> join.
/// Clusters that cannot be fitted are skipped and counted. `jobs` only
/// parallelizes grid accumulation.
PipelineResult run_pipeline(std::span<const BranchCluster> clusters, const PipelineConfig& cfg, Method method,
                            unsigned jobs = 1);

/// label_vertices, except that an empty skeleton
/// scores zero precision and recall with every ground-truth vertex a miss.
EvalReport score(const PipelineResult& result, const SkeletonGraph& gt, double radius);

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. When tasks throw,
/// the exception of the lowest index is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Dataset layout: <root>/<species>_<NN>_d<level>/{clusters.txt, ground_truth.skel,
// occlusion_mask.txt, meta.json}; outputs skeleton_<method>.skel,
// volume_<method>.txt and grid.txt next to them.

struct TreeCase {
  std::string id;
  std::string species;
  int index = 0;
  int density = 0;
  std::uint64_t tree_seed = 0;
  std::uint64_t occlusion_seed = 0;
  std::uint64_t occluder_seed = 0;
};

/// Every (tree, density) case the config describes, in dataset order.
std::vector<TreeCase> plan_dataset(const PipelineConfig& cfg);

/// Generates and writes all cases; returns the tree directories written.
std::vector<std::filesystem::path> synth_dataset(const PipelineConfig& cfg, const std::filesystem::path& out_dir,
                                                 unsigned jobs = 1);

struct SkeletonizeOptions {
  bool volume = false;
  bool grid_dump = false;
};

/// Runs one method on the tree directory and writes its skeleton file.
PipelineResult skeletonize_tree(const PipelineConfig& cfg, const std::filesystem::path& tree_dir, Method method,
                                const SkeletonizeOptions& opts = {}, unsigned jobs = 1);

/// Tree directories below `root` (those holding clusters.txt), sorted by name.
/// `root` itself counts when it is one.
std::vector<std::filesystem::path> find_tree_dirs(const std::filesystem::path& root);

/// Scores existing skeleton files. Throws DataError listing every missing
/// skeleton before scoring anything.
std::vector<EvalRow> evaluate_dataset(const PipelineConfig& cfg, const std::filesystem::path& root,
                                      std::span<const Method> methods, unsigned jobs = 1);

/// Three panels (precision, recall, OSR vs density), one series per method,
/// averaged over tree types.
std::string render_plot_svg(std::span<const SummaryCell> cells);

/// Reads CANOPYSKEL_LOG (trace, debug, info, warn, error, off) and sets the
/// log level; unset means `fallback`.
void configure_logging(const std::string& fallback = "warn");

}  // namespace canopyskel
