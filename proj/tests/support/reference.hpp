#pragma once

// Plain-loop evaluation of the full model, written against the equations
// rather than the tape, used as an oracle by the tests.

#include <optional>
#include <vector>

#include "disclstm/graph.hpp"
#include "disclstm/model.hpp"
#include "disclstm/tensor.hpp"

namespace disclstm::ref {

using Vec = std::vector<double>;

Vec matvec(const Tensor& w, const Vec& x);
Vec column(const Tensor& t);
Vec row_of(const Tensor& t, std::size_t r);

struct GatTrace {
  std::vector<std::vector<Vec>> layers;  // layers[0] is the down-projection
  std::vector<std::vector<Vec>> attention;  // per layer, per node (empty when N_i is empty)
};

GatTrace gat(const ModelParams& params, const Tensor& embeddings, const DiscourseGraph& graph);

struct CellOut {
  Vec h, c;
  Vec f, o, i, p, cand, graph_cand;
};

CellOut cell(const CellParams& params, const Vec& u, const Vec& g, const Vec& h_prev,
             const Vec& c_prev);

/// n x 2*dim_h hidden rows.
std::vector<Vec> bidirectional(const ModelParams& params, const std::vector<Vec>& inputs,
                               const std::vector<Vec>& graph_states);

/// n x num_classes logits.
std::vector<Vec> logits(const ModelParams& params, const Tensor& embeddings,
                        const DiscourseGraph& graph);

}  // namespace disclstm::ref
