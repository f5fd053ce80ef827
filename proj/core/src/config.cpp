#include "canopyskel/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace canopyskel {

namespace {

using nlohmann::json;

/// Reads typed fields out of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    known_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  /// Like get(), but a JSON null or the string "inf" maps to +infinity.
  void get_unbounded(const char* key, double& out) {
    const auto it = obj_.find(key);
    if (it != obj_.end() && (it->is_null() || (it->is_string() && it->get<std::string>() == "inf"))) {
      known_.insert(key);
      out = std::numeric_limits<double>::infinity();
      return;
    }
    get(key, out);
  }

  const json* child(const char* key) {
    known_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string sub(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!known_.contains(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> known_;
};

void read_occlusion(const json& j, const std::string& path, OcclusionParams& o) {
  Fields f(j, path);
  if (const json* c = f.child("occluder_count")) {
    if (c->is_null()) {
      o.occluder_count.reset();
    } else if (c->is_number_integer()) {
      o.occluder_count = c->get<int>();
    } else {
      throw ConfigError(f.sub("occluder_count") + ": wrong type");
    }
  }
  f.get("occluders_per_m3_per_level", o.occluders_per_m3_per_level);
  f.get("occluder_radius_min", o.occluder_radius_min);
  f.get("occluder_radius_max", o.occluder_radius_max);
  f.get("surface_point_density", o.surface_point_density);
  f.get("point_noise_sigma", o.point_noise_sigma);
  f.get("confidence_min", o.confidence_min);
  f.get("confidence_max", o.confidence_max);
  f.get("max_cluster_length", o.max_cluster_length);
  f.get("min_cluster_points", o.min_cluster_points);
  f.get("viewpoint_count", o.viewpoint_count);
  f.get("viewpoint_spread_deg", o.viewpoint_spread_deg);
  f.finish();
}

template <typename Check>
void check(const std::string& field, Check&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

json unbounded(double v) { return std::isfinite(v) ? json(v) : json("inf"); }

}  // namespace

void PipelineConfig::validate() const {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) throw ConfigError("voxel_size: must be > 0");
  if (!(eval_radius >= 0.0) || !std::isfinite(eval_radius)) throw ConfigError("eval_radius: must be >= 0");
  check("kernel", [&] { kernel.validate(); });
  check("fit", [&] { fit.validate(); });
  check("smoothing", [&] { smoothing.validate(); });
  check("path_search", [&] { path_search.validate(); });
  check("ftsem", [&] { ftsem.validate(); });
  if (generator.trees < 0) throw ConfigError("generator.trees: must be >= 0");
  if (generator.species.empty()) throw ConfigError("generator.species: must not be empty");
  for (const auto& s : generator.species) {
    check("generator.species", [&] { TreeGenParams::preset(s, 0); });
  }
  if (generator.density_levels.empty()) throw ConfigError("generator.density_levels: must not be empty");
  std::set<int> seen;
  for (int level : generator.density_levels) {
    if (level < 1 || level > 4) throw ConfigError("generator.density_levels: levels must be in 1..4");
    if (!seen.insert(level).second) throw ConfigError("generator.density_levels: duplicate level");
  }
  if (generator.depth < 0) throw ConfigError("generator.depth: must be >= 0 (0 keeps the preset)");
  check("generator.occlusion", [&] {
    OcclusionParams o = generator.occlusion;
    o.foliage_density_level = 1;
    o.validate();
  });
}

PipelineConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  Fields f(root, "config");
  f.get("voxel_size", cfg.voxel_size);
  f.get("eval_radius", cfg.eval_radius);
  f.get("seed", cfg.seed);
  if (const json* k = f.child("kernel")) {
    Fields g(*k, f.sub("kernel"));
    g.get("k", cfg.kernel.k);
    g.finish();
  }
  if (const json* k = f.child("fit")) {
    Fields g(*k, f.sub("fit"));
    g.get("min_points_full_fit", cfg.fit.min_points_full_fit);
    g.get("max_parameter_corrections", cfg.fit.max_parameter_corrections);
    g.get("default_radius", cfg.fit.default_radius);
    g.finish();
  }
  if (const json* k = f.child("smoothing")) {
    Fields g(*k, f.sub("smoothing"));
    g.get("neighbors_k", cfg.smoothing.neighbors_k);
    g.get("convergence_threshold", cfg.smoothing.convergence_threshold);
    g.get("max_iterations", cfg.smoothing.max_iterations);
    g.finish();
  }
  if (const json* k = f.child("path_search")) {
    Fields g(*k, f.sub("path_search"));
    g.get("p_min", cfg.path_search.p_min);
    g.get_unbounded("max_path_cost", cfg.path_search.max_path_cost);
    g.finish();
  }
  if (const json* k = f.child("ftsem")) {
    Fields g(*k, f.sub("ftsem"));
    g.get("max_connect_distance", cfg.ftsem.max_connect_distance);
    g.get("max_angle_deg", cfg.ftsem.max_angle_deg);
    g.get("endpoint_direction_window", cfg.ftsem.endpoint_direction_window);
    g.finish();
  }
  if (const json* k = f.child("generator")) {
    Fields g(*k, f.sub("generator"));
    g.get("trees", cfg.generator.trees);
    g.get("species", cfg.generator.species);
    g.get("density_levels", cfg.generator.density_levels);
    g.get("depth", cfg.generator.depth);
    if (const json* o = g.child("occlusion")) read_occlusion(*o, g.sub("occlusion"), cfg.generator.occlusion);
    g.finish();
  }
  f.finish();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string dump_config(const PipelineConfig& cfg) {
  const auto& o = cfg.generator.occlusion;
  json occ = {
      {"occluder_count", o.occluder_count ? json(*o.occluder_count) : json(nullptr)},
      {"occluders_per_m3_per_level", o.occluders_per_m3_per_level},
      {"occluder_radius_min", o.occluder_radius_min},
      {"occluder_radius_max", o.occluder_radius_max},
      {"surface_point_density", o.surface_point_density},
      {"point_noise_sigma", o.point_noise_sigma},
      {"confidence_min", o.confidence_min},
      {"confidence_max", o.confidence_max},
      {"max_cluster_length", o.max_cluster_length},
      {"min_cluster_points", o.min_cluster_points},
      {"viewpoint_count", o.viewpoint_count},
      {"viewpoint_spread_deg", o.viewpoint_spread_deg},
  };
  json root = {
      {"voxel_size", cfg.voxel_size},
      {"eval_radius", cfg.eval_radius},
      {"seed", cfg.seed},
      {"kernel", {{"k", cfg.kernel.k}}},
      {"fit",
       {{"min_points_full_fit", cfg.fit.min_points_full_fit},
        {"max_parameter_corrections", cfg.fit.max_parameter_corrections},
        {"default_radius", cfg.fit.default_radius}}},
      {"smoothing",
       {{"neighbors_k", cfg.smoothing.neighbors_k},
        {"convergence_threshold", cfg.smoothing.convergence_threshold},
        {"max_iterations", cfg.smoothing.max_iterations}}},
      {"path_search", {{"p_min", cfg.path_search.p_min}, {"max_path_cost", unbounded(cfg.path_search.max_path_cost)}}},
      {"ftsem",
       {{"max_connect_distance", cfg.ftsem.max_connect_distance},
        {"max_angle_deg", cfg.ftsem.max_angle_deg},
        {"endpoint_direction_window", cfg.ftsem.endpoint_direction_window}}},
      {"generator",
       {{"trees", cfg.generator.trees},
        {"species", cfg.generator.species},
        {"density_levels", cfg.generator.density_levels},
        {"depth", cfg.generator.depth},
        {"occlusion", occ}}},
  };
  return root.dump(2) + "\n";
}

}  // namespace canopyskel
