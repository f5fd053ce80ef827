#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "canopyskel/geometry.hpp"

namespace canopyskel {

enum class VertexLabel : std::uint8_t { TP, TP_occ, FP };

struct EvalReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tp_occ = 0;
  double precision = 0.0;
  double recall = 0.0;
  double osr = 0.0;
  std::vector<VertexLabel> per_vertex_labels;

  /// Recomputes precision, recall and osr from the counts. Ratios with a
  /// zero denominator are 0.
  void finalize();
};

/// Labels every output vertex TP or FP by its distance to the ground-truth
/// polyline (edges, not just vertices) and counts ground-truth vertices with
/// no output vertex within `radius` as FN. Distances equal to `radius` match.
///
/// A TP vertex counts toward tp_occ when it is PathDerived. Throws
/// GeometryError when either graph is empty.
EvalReport label_vertices(const SkeletonGraph& output, const SkeletonGraph& gt, double radius = 0.02);

/// One scored (tree, method) pair.
struct EvalRow {
  std::string tree_id;
  std::string tree_type;
  std::string method;
  int density = 0;
  EvalReport report;
};

struct SummaryCell {
  std::string tree_type;
  std::string method;
  int density = 0;
  std::size_t trees = 0;
  double precision = 0.0;
  double recall = 0.0;
  double osr = 0.0;
};

/// Arithmetic means of precision, recall and OSR per (tree type, density,
/// method), ordered by tree type, method, then density. Throws
/// std::invalid_argument on empty input.
std::vector<SummaryCell> aggregate(std::span<const EvalRow> rows);

/// "tree_id,method,density,precision,recall,osr,tp,fp,fn,tp_occ" plus one line per row.
void write_csv(std::ostream& os, std::span<const EvalRow> rows);

/// Table with one line per (tree type, method) and P / R / OSR columns per density.
void write_summary_table(std::ostream& os, std::span<const SummaryCell> cells);

}  // namespace canopyskel
