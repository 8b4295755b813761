#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "disclstm/autodiff.hpp"
#include "disclstm/graph.hpp"
#include "disclstm/tensor.hpp"

namespace disclstm {

/// Dimension chain: embeddings (dim_u) -> graph states (dim_g) -> cell
/// hidden (dim_h) -> logits (num_classes).
struct ModelConfig {
  std::size_t dim_u = 1024;
  std::size_t dim_g = 300;
  std::size_t dim_h = 300;
  std::size_t layers = 2;
  std::size_t num_classes = 7;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// ---------------------------------------------------------------------------
// Parameters

/// The six gate/candidate paths of the cell. Only forget, output, input and
/// candidate read the previous hidden state; only forget, output, the graph
/// gate and the graph candidate read the graph-encoded state.
enum class Gate : std::uint8_t {
  kForget,
  kOutput,
  kInput,
  kGraphGate,
  kCandidate,
  kGraphCandidate,
};

inline constexpr std::array<Gate, 6> kGates = {Gate::kForget,    Gate::kOutput,    Gate::kInput,
                                               Gate::kGraphGate, Gate::kCandidate, Gate::kGraphCandidate};

constexpr bool gate_reads_hidden(Gate g) noexcept {
  return g == Gate::kForget || g == Gate::kOutput || g == Gate::kInput || g == Gate::kCandidate;
}
constexpr bool gate_reads_graph(Gate g) noexcept {
  return g == Gate::kForget || g == Gate::kOutput || g == Gate::kGraphGate ||
         g == Gate::kGraphCandidate;
}
std::string_view gate_name(Gate g) noexcept;

struct GateParams {
  Tensor input;                     // dim_h x dim_u
  std::optional<Tensor> recurrent;  // dim_h x dim_h
  std::optional<Tensor> graph;      // dim_h x dim_g
  Tensor bias;                      // dim_h x 1

  friend bool operator==(const GateParams&, const GateParams&) = default;
};

struct CellParams {
  std::array<GateParams, 6> gates;

  GateParams& operator[](Gate g) { return gates[static_cast<std::size_t>(g)]; }
  const GateParams& operator[](Gate g) const { return gates[static_cast<std::size_t>(g)]; }

  friend bool operator==(const CellParams&, const CellParams&) = default;
};

struct GatParams {
  Tensor down_weight;              // dim_g x dim_u
  Tensor down_bias;                // dim_g x 1
  std::vector<Tensor> attention;   // per layer, 1 x 2*dim_g

  friend bool operator==(const GatParams&, const GatParams&) = default;
};

struct ClassifierParams {
  Tensor weight;  // num_classes x 2*dim_h
  Tensor bias;    // num_classes x 1

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

enum class Direction : std::uint8_t { kForward = 0, kBackward = 1 };

struct ModelParams {
  ModelConfig config;
  GatParams gat;
  std::array<CellParams, 2> cells;  // indexed by Direction
  ClassifierParams head;

  /// Every tensor allocated and zero-filled.
  static ModelParams zeros(const ModelConfig& config);

  CellParams& cell(Direction d) { return cells[static_cast<std::size_t>(d)]; }
  const CellParams& cell(Direction d) const { return cells[static_cast<std::size_t>(d)]; }
  std::size_t scalar_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Visits every tensor in canonical order as f(name, tensor). The order is
/// the checkpoint layout and the initialization sampling order.
template <class Params, class F>
void for_each_parameter(Params& p, F&& f) {
  f(std::string("gat.down.weight"), p.gat.down_weight);
  f(std::string("gat.down.bias"), p.gat.down_bias);
  for (std::size_t l = 0; l < p.gat.attention.size(); ++l) {
    f("gat.attention." + std::to_string(l), p.gat.attention[l]);
  }
  for (std::size_t d = 0; d < p.cells.size(); ++d) {
    const std::string prefix = d == 0 ? "cell.forward." : "cell.backward.";
    for (Gate g : kGates) {
      auto& gp = p.cells[d][g];
      const std::string base = prefix + std::string(gate_name(g));
      f(base + ".input", gp.input);
      if (gp.recurrent) f(base + ".recurrent", *gp.recurrent);
      if (gp.graph) f(base + ".graph", *gp.graph);
      f(base + ".bias", gp.bias);
    }
  }
  f(std::string("head.weight"), p.head.weight);
  f(std::string("head.bias"), p.head.bias);
}

std::vector<Tensor> flatten(const ModelParams& params);
void unflatten(std::span<const Tensor> tensors, ModelParams& params);

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)); biases zero except the
/// forget-gate bias, which is 1. Deterministic in (config, seed).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tape-level forward pass

struct BoundGate {
  ad::Var input;
  std::optional<ad::Var> recurrent;
  std::optional<ad::Var> graph;
  ad::Var bias;
};

struct BoundCell {
  std::array<BoundGate, 6> gates;
  const BoundGate& operator[](Gate g) const { return gates[static_cast<std::size_t>(g)]; }
};

/// Parameters registered as leaves of one tape. The tape borrows the
/// tensors, so `params` must outlive it.
struct BoundParams {
  ModelConfig config;
  ad::Var down_weight;
  ad::Var down_bias;
  std::vector<ad::Var> attention;
  std::array<BoundCell, 2> cells;
  ad::Var head_weight;
  ad::Var head_bias;
};

BoundParams bind(ad::Tape& tape, const ModelParams& params);

/// Adds scale * d(root)/d(param) for every parameter into `grads`, which must
/// have the layout of the bound parameters.
void accumulate_gradients(const ad::Tape& tape, const BoundParams& bound, ModelParams& grads,
                          double scale = 1.0);

/// g_i = W_down u_i + b_down for every row of the n x dim_u matrix.
std::vector<ad::Var> down_project(ad::Var embeddings, ad::Var weight, ad::Var bias);

struct GatLayerResult {
  std::vector<ad::Var> states;
  /// Attention weights over the predecessors of each node (in predecessor
  /// order); empty for nodes without predecessors.
  std::vector<std::optional<ad::Var>> attention;
};

/// One attention layer. Nodes are updated in index order, so a node attends
/// over its predecessors' states from this layer, keyed by its own state
/// from the previous layer, and adds that previous state back as a residual.
GatLayerResult gat_layer(std::span<const ad::Var> previous, const DiscourseGraph& graph,
                         ad::Var attention_weight);

/// Down-projection followed by `config.layers` attention layers.
std::vector<ad::Var> gat_encode(ad::Var embeddings, const DiscourseGraph& graph,
                                const BoundParams& params);

struct CellState {
  ad::Var h;
  ad::Var c;
};

struct CellStep {
  ad::Var h;
  ad::Var c;
  std::array<ad::Var, 6> activations;  // indexed by Gate; candidates are tanh outputs

  const ad::Var& operator[](Gate g) const { return activations[static_cast<std::size_t>(g)]; }
};

CellState zero_state(ad::Tape& tape, std::size_t dim_h);

CellStep disclstm_cell(ad::Var input, ad::Var graph_state, const CellState& previous,
                       const BoundCell& cell);

/// Runs the forward cell over t = 0..n-1 and the backward cell over
/// t = n-1..0 from zero states; row i is [h_forward_i ; h_backward_i].
std::vector<ad::Var> run_bidirectional(std::span<const ad::Var> inputs,
                                       std::span<const ad::Var> graph_states,
                                       const BoundParams& params);

std::vector<ad::Var> classify(std::span<const ad::Var> hidden, ad::Var weight, ad::Var bias);

/// Full pipeline for one dialogue; returns one logit vector per utterance.
std::vector<ad::Var> forward(ad::Tape& tape, const BoundParams& params, const Tensor& embeddings,
                             const DiscourseGraph& graph);

// ---------------------------------------------------------------------------
// Value-level helpers

/// n x num_classes logits for one dialogue.
Tensor forward_logits(const ModelParams& params, const Tensor& embeddings,
                      const DiscourseGraph& graph);

/// Row-wise argmax; ties go to the lowest class index.
std::vector<std::size_t> argmax_rows(const Tensor& logits);

std::vector<std::size_t> predict(const ModelParams& params, const Tensor& embeddings,
                                 const DiscourseGraph& graph);

// ---------------------------------------------------------------------------
// Standard LSTM cell, evaluated with plain arithmetic (no tape)

struct VanillaLstmParams {
  // Each indexed forget, input, output, candidate.
  std::array<Tensor, 4> input;
  std::array<Tensor, 4> recurrent;
  std::array<Tensor, 4> bias;
};

struct PlainCellState {
  Tensor h;
  Tensor c;
};

/// The standard-LSTM subset of a DiscLSTM cell's parameters.
VanillaLstmParams vanilla_view(const CellParams& cell);

PlainCellState vanilla_lstm_reference(const Tensor& input, const PlainCellState& previous,
                                      const VanillaLstmParams& params);

}  // namespace disclstm
