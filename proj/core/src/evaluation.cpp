#include "canopyskel/evaluation.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "canopyskel/kd_tree.hpp"

namespace canopyskel {

void EvalReport::finalize() {
  precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  osr = tp + fp > 0 ? static_cast<double>(tp_occ) / static_cast<double>(tp + fp) : 0.0;
}

EvalReport label_vertices(const SkeletonGraph& output, const SkeletonGraph& gt, double radius) {
  if (output.vertex_count() == 0) throw GeometryError("label_vertices: empty output skeleton");
  if (gt.vertex_count() == 0) throw GeometryError("label_vertices: empty ground truth");
  if (!(radius >= 0.0)) throw GeometryError("label_vertices: radius must be >= 0");

  std::vector<Point3> gt_pts;
  gt_pts.reserve(gt.vertex_count());
  for (const auto& v : gt.vertices()) gt_pts.push_back(v.position);
  const auto gt_adj = gt.adjacency();
  double max_edge = 0.0;
  for (const auto& [u, v] : gt.edges()) max_edge = std::max(max_edge, (gt_pts[u] - gt_pts[v]).norm());
  const KdTree gt_tree(gt_pts);

  // A point within `radius` of edge (a, b) is within radius + |ab|/2 of
  // one of its endpoints, so the candidate set below is complete.
  const double reach = radius + 0.5 * max_edge;
  EvalReport rep;
  rep.per_vertex_labels.reserve(output.vertex_count());
  for (std::size_t i = 0; i < output.vertex_count(); ++i) {
    const auto& ov = output.vertices()[i];
    const Point3& q = ov.position;
    bool hit = false;
    for (auto g : gt_tree.within(q, reach)) {
      if ((gt_pts[g] - q).norm() <= radius) {
        hit = true;
        break;
      }
      for (auto n : gt_adj[g]) {
        if (point_to_segment_distance(q, gt_pts[g], gt_pts[n]) <= radius) {
          hit = true;
          break;
        }
      }
      if (hit) break;
    }
    if (!hit) {
      ++rep.fp;
      rep.per_vertex_labels.push_back(VertexLabel::FP);
      continue;
    }
    ++rep.tp;
    if (ov.provenance == Provenance::PathDerived) {
      ++rep.tp_occ;
      rep.per_vertex_labels.push_back(VertexLabel::TP_occ);
    } else {
      rep.per_vertex_labels.push_back(VertexLabel::TP);
    }
  }

  std::vector<Point3> out_pts;
  out_pts.reserve(output.vertex_count());
  for (const auto& v : output.vertices()) out_pts.push_back(v.position);
  const KdTree out_tree(out_pts);
  for (const auto& g : gt_pts) {
    if (!out_tree.any_within(g, radius)) ++rep.fn;
  }
  rep.finalize();
  return rep;
}

std::vector<SummaryCell> aggregate(std::span<const EvalRow> rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate: no reports");
  std::map<std::tuple<std::string, std::string, int>, SummaryCell> cells;
  for (const auto& r : rows) {
    auto& c = cells[{r.tree_type, r.method, r.density}];
    c.tree_type = r.tree_type;
    c.method = r.method;
    c.density = r.density;
    ++c.trees;
    c.precision += r.report.precision;
    c.recall += r.report.recall;
    c.osr += r.report.osr;
  }
  std::vector<SummaryCell> out;
  out.reserve(cells.size());
  for (auto& [key, c] : cells) {
    const auto n = static_cast<double>(c.trees);
    c.precision /= n;
    c.recall /= n;
    c.osr /= n;
    out.push_back(c);
  }
  return out;
}

void write_csv(std::ostream& os, std::span<const EvalRow> rows) {
  os << "tree_id,method,density,precision,recall,osr,tp,fp,fn,tp_occ\n";
  for (const auto& r : rows) {
    const auto& e = r.report;
    fmt::print(os, "{},{},{},{},{},{},{},{},{},{}\n", r.tree_id, r.method, r.density, e.precision, e.recall,
               e.osr, e.tp, e.fp, e.fn, e.tp_occ);
  }
}

void write_summary_table(std::ostream& os, std::span<const SummaryCell> cells) {
  std::set<int> densities;
  std::map<std::pair<std::string, std::string>, std::map<int, const SummaryCell*>> table;
  for (const auto& c : cells) {
    densities.insert(c.density);
    table[{c.tree_type, c.method}][c.density] = &c;
  }
  fmt::print(os, "{:<10} {:<11}", "tree", "method");
  for (int d : densities) fmt::print(os, " | density {:<13}", d);
  os << '\n';
  fmt::print(os, "{:<10} {:<11}", "", "");
  for (std::size_t i = 0; i < densities.size(); ++i) fmt::print(os, " | {:>6} {:>6} {:>6}", "P", "R", "OSR");
  os << '\n';
  for (const auto& [key, by_density] : table) {
    fmt::print(os, "{:<10} {:<11}", key.first, key.second);
    for (int d : densities) {
      const auto it = by_density.find(d);
      if (it == by_density.end()) {
        fmt::print(os, " | {:>6} {:>6} {:>6}", "-", "-", "-");
      } else {
        fmt::print(os, " | {:>6.3f} {:>6.3f} {:>6.3f}", it->second->precision, it->second->recall,
                   it->second->osr);
      }
    }
    os << '\n';
  }
}

}  // namespace canopyskel
