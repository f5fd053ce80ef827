#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "canopyskel/geometry.hpp"

namespace canopyskel {

/// Malformed input file. what() reads "line N: msg", or "source:N: msg"
/// once the file name is known.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message, const std::string& source = {});
  std::size_t line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Line iterator that skips blank lines and keeps the 1-based number of the
/// line last returned.
class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}
  bool next(std::string& line);
  std::size_t line_number() const { return line_; }

 private:
  std::istream& is_;
  std::size_t line_ = 0;
};

// Clusters: "cluster <id> <confidence> <n>" followed by n "x y z" lines.
void write_clusters(std::ostream& os, std::span<const BranchCluster> clusters);
std::vector<BranchCluster> read_clusters(std::istream& is);

// Skeleton: "skeleton <nv> <ne>", nv "id x y z radius obs|path" lines, ne "u v" lines.
void write_skeleton(std::ostream& os, const SkeletonGraph& graph);
SkeletonGraph read_skeleton(std::istream& is);

// Mask: "mask <n>" followed by n lines of 0 or 1.
void write_mask(std::ostream& os, const std::vector<bool>& mask);
std::vector<bool> read_mask(std::istream& is);

// Volume: "volume <n>" followed by one "x y z radius" sphere per vertex.
void write_volume(std::ostream& os, const SkeletonGraph& graph);

/// ASCII PLY point cloud with per-point `cluster` and `confidence` properties.
void write_ply(std::ostream& os, std::span<const BranchCluster> clusters);
/// Reads ASCII PLY vertices. Points are grouped by a `cluster` property when
/// present (confidence from a `confidence` property, else 1); otherwise all
/// points form one cluster.
std::vector<BranchCluster> read_ply(std::istream& is);

/// Opens `path` and parses it with `reader`; IoError when it cannot be opened.
template <typename F>
auto read_file(const std::filesystem::path& path, F&& reader);

/// Writes through a temporary sibling file and renames it into place.
void write_file(const std::filesystem::path& path, const std::string& contents);
std::string slurp(const std::filesystem::path& path);

}  // namespace canopyskel

#include <fstream>

namespace canopyskel {

template <typename F>
auto read_file(const std::filesystem::path& path, F&& reader) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return reader(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.message(), path.string());
  }
}

}  // namespace canopyskel
