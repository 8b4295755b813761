#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disclstm/corpus.hpp"

namespace disclstm {

/// Binary discourse adjacency over the utterances of one dialogue.
/// `adjacent(src, tgt)` is set only for src < tgt.
class DiscourseGraph {
 public:
  DiscourseGraph() = default;

  std::size_t size() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edge_count_; }
  bool adjacent(std::size_t src, std::size_t tgt) const { return adjacency_[src * n_ + tgt] != 0; }
  /// Sorted predecessor indices of node i, all < i.
  std::span<const std::size_t> predecessors(std::size_t i) const { return predecessors_.at(i); }

  friend DiscourseGraph build_graph(std::size_t n,
                                    std::span<const std::pair<std::size_t, std::size_t>> edges);
  friend bool operator==(const DiscourseGraph&, const DiscourseGraph&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t edge_count_ = 0;
  std::vector<std::uint8_t> adjacency_;  // row = source
  std::vector<std::vector<std::size_t>> predecessors_;
};

/// Throws FormatError for out-of-range indices or src >= tgt. Repeated
/// pairs collapse into one edge.
DiscourseGraph build_graph(std::size_t n,
                           std::span<const std::pair<std::size_t, std::size_t>> edges);
DiscourseGraph build_graph(const Dialogue& dialogue);
/// Same nodes, no edges.
DiscourseGraph edgeless_graph(std::size_t n);

struct GraphStats {
  std::size_t n = 0;
  std::size_t edges = 0;
  std::size_t complete_edges = 0;  // n(n-1)/2
  double density = 0.0;            // 0 when n == 1
};

GraphStats edge_stats(const DiscourseGraph& graph);

struct GraphStatsSummary {
  std::vector<std::pair<std::string, GraphStats>> dialogues;
  double mean_density = 0.0;
  double median_density = 0.0;
  double mean_edges = 0.0;
  double mean_complete_edges = 0.0;
};

GraphStatsSummary summarize_graphs(std::span<const Dialogue> dialogues);

}  // namespace disclstm
