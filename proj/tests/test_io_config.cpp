#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "canopyskel/config.hpp"
#include "canopyskel/io.hpp"

using namespace canopyskel;
namespace fs = std::filesystem;

namespace {

std::size_t parse_error_line(const std::string& text, auto reader) {
  std::istringstream is(text);
  try {
    reader(is);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

SkeletonGraph random_graph(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-10, 10);
  SkeletonGraph g;
  for (int i = 0; i < n; ++i) {
    g.add_vertex({Point3(u(rng), u(rng), u(rng)), std::abs(u(rng)) / 100.0,
                  i % 4 ? Provenance::Observed : Provenance::PathDerived});
  }
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> p(0, i - 1);
    g.add_edge(p(rng), i);
  }
  return g;
}

}  // namespace

TEST(SkeletonIo, RoundTrip) {
  std::mt19937_64 rng(61);
  const auto g = random_graph(rng, 200);
  std::stringstream ss;
  write_skeleton(ss, g);
  const auto back = read_skeleton(ss);
  ASSERT_EQ(back.vertex_count(), g.vertex_count());
  EXPECT_EQ(back.edges(), g.edges());
  for (std::size_t i = 0; i < g.vertex_count(); ++i) {
    EXPECT_LT((back.vertices()[i].position - g.vertices()[i].position).norm(), 1e-9);
    EXPECT_NEAR(back.vertices()[i].radius, g.vertices()[i].radius, 1e-9);
    EXPECT_EQ(back.vertices()[i].provenance, g.vertices()[i].provenance);
  }
}

TEST(SkeletonIo, Format) {
  SkeletonGraph g;
  g.add_vertex({Point3(0, 0, 0), 0.01, Provenance::Observed});
  g.add_vertex({Point3(1, 0, 0), 0.02, Provenance::PathDerived});
  g.add_edge(0, 1);
  std::ostringstream os;
  write_skeleton(os, g);
  std::istringstream lines(os.str());
  std::string header;
  std::string v0;
  std::string v1;
  std::string e;
  std::getline(lines, header);
  std::getline(lines, v0);
  std::getline(lines, v1);
  std::getline(lines, e);
  EXPECT_EQ(header, "skeleton 2 1");
  EXPECT_EQ(v0.substr(0, 2), "0 ");
  EXPECT_EQ(v0.substr(v0.size() - 4), " obs");
  EXPECT_EQ(v1.substr(v1.size() - 5), " path");
  EXPECT_EQ(e, "0 1");
}

TEST(SkeletonIo, ErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line("skel 1 0\n", read_skeleton), 1u);
  EXPECT_EQ(parse_error_line("skeleton 2 1\n0 0 0 0 0.01 obs\n1 0 0 0 0.01 maybe\n0 1\n", read_skeleton), 3u);
  EXPECT_EQ(parse_error_line("skeleton 2 1\n0 0 0 0 0.01 obs\n1 1 0 0 0.01 obs\n0 5\n", read_skeleton), 4u);
  EXPECT_EQ(parse_error_line("skeleton 2 1\n0 0 0 0 0.01 obs\n1 1 0 0 0.01 obs\n", read_skeleton), 3u);
  EXPECT_EQ(parse_error_line("skeleton 1 0\n\n7 0 0 0 0.01 obs\n", read_skeleton), 3u);
}

TEST(ClusterIo, RoundTripAndFormat) {
  BranchCluster c;
  c.cluster_id = 4;
  c.confidence = 0.88;
  c.points = {{0.1, 0.2, 0.3}, {-1.5, 2.25, 1e-3}};
  std::stringstream ss;
  const std::vector<BranchCluster> in{c};
  write_clusters(ss, in);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "cluster 4 0.88 2");
  const auto back = read_clusters(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].cluster_id, 4);
  EXPECT_EQ(back[0].confidence, 0.88);
  ASSERT_EQ(back[0].points.size(), 2u);
  EXPECT_LT((back[0].points[1] - c.points[1]).norm(), 1e-12);
}

TEST(ClusterIo, Errors) {
  EXPECT_EQ(parse_error_line("cluster 0 1.5 1\n0 0 0\n", read_clusters), 1u);
  EXPECT_EQ(parse_error_line("cluster 0 0.5 2\n0 0 0\n1 x 0\n", read_clusters), 3u);
  EXPECT_EQ(parse_error_line("cluster 0 0.5 2\n0 0 0\n", read_clusters), 2u);
}

TEST(MaskIo, RoundTripAndErrors) {
  const std::vector<bool> mask{true, false, false, true};
  std::stringstream ss;
  write_mask(ss, mask);
  EXPECT_EQ(read_mask(ss), mask);
  EXPECT_EQ(parse_error_line("mask 2\n1\n2\n", read_mask), 3u);
}

TEST(PlyIo, RoundTripKeepsClusters) {
  std::vector<BranchCluster> clusters(2);
  clusters[0].cluster_id = 0;
  clusters[0].confidence = 0.7;
  clusters[0].points = {{0, 0, 0}, {1, 0, 0}};
  clusters[1].cluster_id = 1;
  clusters[1].confidence = 0.9;
  clusters[1].points = {{0, 1, 0}};
  std::stringstream ss;
  write_ply(ss, clusters);
  const auto back = read_ply(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].points.size(), 2u);
  EXPECT_NEAR(back[1].confidence, 0.9, 1e-12);
}

TEST(PlyIo, PlainPointCloudIsOneCluster) {
  std::istringstream is(
      "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
      "end_header\n0 0 0\n1 0 0\n2 0 0\n");
  const auto c = read_ply(is);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].points.size(), 3u);
  EXPECT_EQ(c[0].confidence, 1.0);
  EXPECT_EQ(parse_error_line("ply\nformat binary_little_endian 1.0\nend_header\n", read_ply), 2u);
}

TEST(FileIo, MissingFileAndSourceName) {
  EXPECT_THROW(read_file("/nonexistent/clusters.txt", read_clusters), IoError);
  const fs::path p = fs::temp_directory_path() / "canopyskel_bad_clusters.txt";
  write_file(p, "cluster 0 0.5 1\nfoo\n");
  try {
    read_file(p, read_clusters);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(std::string(e.what()), p.string() + ":2: expected 'x y z'");
  }
  fs::remove(p);
}

TEST(Config, DefaultsRoundTrip) {
  const PipelineConfig def;
  const auto text = dump_config(def);
  const auto back = parse_config(text);
  EXPECT_EQ(dump_config(back), text);
  EXPECT_EQ(back.voxel_size, 0.02);
  EXPECT_EQ(back.kernel.k, 3.0);
  EXPECT_EQ(back.path_search.p_min, 0.05);
  EXPECT_EQ(back.ftsem.max_connect_distance, 0.10);
  EXPECT_EQ(back.ftsem.max_angle_deg, 30.0);
  EXPECT_EQ(back.ftsem.endpoint_direction_window, 5);
}

TEST(Config, PartialOverride) {
  const auto cfg = parse_config(R"({"seed": 7, "path_search": {"p_min": 0.1}, "generator": {"trees": 2}})");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.path_search.p_min, 0.1);
  EXPECT_EQ(cfg.generator.trees, 2);
  EXPECT_EQ(cfg.voxel_size, 0.02);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("{"), ConfigError);
  EXPECT_THROW(parse_config(R"({"voxel_sise": 0.02})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"voxel_size": "big"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"voxel_size": -1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"smoothing": {"neighbors_k": 0}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"generator": {"density_levels": [1, 5]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"generator": {"species": ["birch"]}})"), ConfigError);
  try {
    parse_config(R"({"kernel": {"k": 0}})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("kernel"), std::string::npos);
  }
}
