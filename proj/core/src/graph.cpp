#include "disclstm/graph.hpp"

#include <algorithm>

#include "disclstm/error.hpp"

namespace disclstm {

DiscourseGraph build_graph(std::size_t n,
                           std::span<const std::pair<std::size_t, std::size_t>> edges) {
  if (n == 0) throw FormatError("discourse graph needs at least one node");
  DiscourseGraph g;
  g.n_ = n;
  g.adjacency_.assign(n * n, 0);
  g.predecessors_.resize(n);
  for (const auto& [src, tgt] : edges) {
    if (src >= n || tgt >= n) {
      throw FormatError("edge (" + std::to_string(src) + "," + std::to_string(tgt) +
                        ") out of range for " + std::to_string(n) + " nodes");
    }
    if (src >= tgt) throw FormatError("edge src must precede tgt");
    std::uint8_t& cell = g.adjacency_[src * n + tgt];
    if (cell != 0) continue;
    cell = 1;
    ++g.edge_count_;
    g.predecessors_[tgt].push_back(src);
  }
  for (auto& preds : g.predecessors_) std::sort(preds.begin(), preds.end());
  return g;
}

DiscourseGraph build_graph(const Dialogue& dialogue) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(dialogue.edges.size());
  for (const Edge& e : dialogue.edges) pairs.emplace_back(e.src, e.tgt);
  return build_graph(dialogue.size(), pairs);
}

DiscourseGraph edgeless_graph(std::size_t n) { return build_graph(n, {}); }

GraphStats edge_stats(const DiscourseGraph& graph) {
  GraphStats s;
  s.n = graph.size();
  s.edges = graph.edge_count();
  s.complete_edges = s.n * (s.n - 1) / 2;
  s.density = s.complete_edges == 0
                  ? 0.0
                  : static_cast<double>(s.edges) / static_cast<double>(s.complete_edges);
  return s;
}

GraphStatsSummary summarize_graphs(std::span<const Dialogue> dialogues) {
  GraphStatsSummary out;
  std::vector<double> densities;
  for (const Dialogue& d : dialogues) {
    GraphStats s = edge_stats(build_graph(d));
    densities.push_back(s.density);
    out.mean_edges += static_cast<double>(s.edges);
    out.mean_complete_edges += static_cast<double>(s.complete_edges);
    out.dialogues.emplace_back(d.id, s);
  }
  if (densities.empty()) return out;
  const double count = static_cast<double>(densities.size());
  double total = 0.0;
  for (double v : densities) total += v;
  out.mean_density = total / count;
  out.mean_edges /= count;
  out.mean_complete_edges /= count;
  std::sort(densities.begin(), densities.end());
  const std::size_t mid = densities.size() / 2;
  out.median_density = densities.size() % 2 == 1 ? densities[mid]
                                                   : 0.5 * (densities[mid - 1] + densities[mid]);
  return out;
}

}  // namespace disclstm
