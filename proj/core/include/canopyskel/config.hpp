#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "canopyskel/baselines.hpp"
#include "canopyskel/likelihood_map.hpp"
#include "canopyskel/segment_fit.hpp"
#include "canopyskel/skeleton.hpp"
#include "canopyskel/synthgen.hpp"

namespace canopyskel {

/// Invalid or unreadable configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeneratorConfig {
  /// Number of tree topologies; tree i uses species[i % species.size()].
  int trees = 10;
  std::vector<std::string> species{"oak", "apple", "walnut"};
  std::vector<int> density_levels{1, 2, 3, 4};
  /// Overrides applied on top of each species preset when set (depth < 1 = keep preset).
  int depth = 0;
  OcclusionParams occlusion;
};

struct PipelineConfig {
  double voxel_size = 0.02;
  EllipsoidKernelConfig kernel;
  FitConfig fit;
  SmoothingConfig smoothing;
  PathSearchConfig path_search;
  FtsemConfig ftsem;
  GeneratorConfig generator;
  double eval_radius = 0.02;
  std::uint64_t seed = 42;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses JSON text. Missing keys keep their defaults; unknown keys,
/// wrong types and invalid values raise ConfigError.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Full JSON rendering (every field), stable key order.
std::string dump_config(const PipelineConfig& cfg);

}  // namespace canopyskel
