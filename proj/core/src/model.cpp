#include "disclstm/model.hpp"

#include <cmath>

#include "disclstm/error.hpp"
#include "disclstm/rng.hpp"

namespace disclstm {

void ModelConfig::validate() const {
  if (dim_u == 0 || dim_g == 0 || dim_h == 0 || num_classes == 0) {
    throw UsageError("model dimensions must be >= 1");
  }
  if (layers == 0) throw UsageError("model needs at least one attention layer");
}

std::string_view gate_name(Gate g) noexcept {
  switch (g) {
    case Gate::kForget: return "forget";
    case Gate::kOutput: return "output";
    case Gate::kInput: return "input";
    case Gate::kGraphGate: return "graph_gate";
    case Gate::kCandidate: return "candidate";
    case Gate::kGraphCandidate: return "graph_candidate";
  }
  return "?";
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.gat.down_weight = Tensor(config.dim_g, config.dim_u);
  p.gat.down_bias = Tensor(config.dim_g, 1);
  p.gat.attention.assign(config.layers, Tensor(1, 2 * config.dim_g));
  for (CellParams& cell : p.cells) {
    for (Gate g : kGates) {
      GateParams& gp = cell[g];
      gp.input = Tensor(config.dim_h, config.dim_u);
      if (gate_reads_hidden(g)) gp.recurrent = Tensor(config.dim_h, config.dim_h);
      if (gate_reads_graph(g)) gp.graph = Tensor(config.dim_h, config.dim_g);
      gp.bias = Tensor(config.dim_h, 1);
    }
  }
  p.head.weight = Tensor(config.num_classes, 2 * config.dim_h);
  p.head.bias = Tensor(config.num_classes, 1);
  return p;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t total = 0;
  for_each_parameter(*this, [&](const std::string&, const Tensor& t) { total += t.size(); });
  return total;
}

std::vector<Tensor> flatten(const ModelParams& params) {
  std::vector<Tensor> out;
  for_each_parameter(params, [&](const std::string&, const Tensor& t) { out.push_back(t); });
  return out;
}

void unflatten(std::span<const Tensor> tensors, ModelParams& params) {
  std::size_t k = 0;
  for_each_parameter(params, [&](const std::string& name, Tensor& t) {
    if (k >= tensors.size() || !tensors[k].same_shape(t)) {
      throw ShapeError("unflatten: tensor " + std::to_string(k) + " does not fit " + name);
    }
    t = tensors[k++];
  });
  if (k != tensors.size()) throw ShapeError("unflatten: too many tensors");
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(config);
  Rng rng(derive_seed(seed, 0x1a17));
  for_each_parameter(p, [&](const std::string& name, Tensor& t) {
    if (t.cols() == 1 && name.ends_with("bias")) {
      if (name.find(".forget.") != std::string::npos) t.fill(1.0);
      return;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
  });
  return p;
}

// ---------------------------------------------------------------------------

BoundParams bind(ad::Tape& tape, const ModelParams& params) {
  BoundParams b;
  b.config = params.config;
  b.down_weight = tape.parameter(params.gat.down_weight);
  b.down_bias = tape.parameter(params.gat.down_bias);
  for (const Tensor& a : params.gat.attention) b.attention.push_back(tape.parameter(a));
  for (std::size_t d = 0; d < 2; ++d) {
    for (Gate g : kGates) {
      const GateParams& src = params.cells[d][g];
      BoundGate& dst = b.cells[d].gates[static_cast<std::size_t>(g)];
      dst.input = tape.parameter(src.input);
      if (src.recurrent) dst.recurrent = tape.parameter(*src.recurrent);
      if (src.graph) dst.graph = tape.parameter(*src.graph);
      dst.bias = tape.parameter(src.bias);
    }
  }
  b.head_weight = tape.parameter(params.head.weight);
  b.head_bias = tape.parameter(params.head.bias);
  return b;
}

void accumulate_gradients(const ad::Tape& tape, const BoundParams& bound, ModelParams& grads,
                          double scale) {
  auto acc = [&](ad::Var v, Tensor& into) {
    const Tensor& g = tape.grad(v);
    if (!g.same_shape(into)) throw ShapeError("accumulate_gradients: layout mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) into[i] += scale * g[i];
  };
  acc(bound.down_weight, grads.gat.down_weight);
  acc(bound.down_bias, grads.gat.down_bias);
  for (std::size_t l = 0; l < bound.attention.size(); ++l) acc(bound.attention[l], grads.gat.attention.at(l));
  for (std::size_t d = 0; d < 2; ++d) {
    for (Gate g : kGates) {
      const BoundGate& src = bound.cells[d][g];
      GateParams& dst = grads.cells[d][g];
      acc(src.input, dst.input);
      if (src.recurrent) acc(*src.recurrent, *dst.recurrent);
      if (src.graph) acc(*src.graph, *dst.graph);
      acc(src.bias, dst.bias);
    }
  }
  acc(bound.head_weight, grads.head.weight);
  acc(bound.head_bias, grads.head.bias);
}

std::vector<ad::Var> down_project(ad::Var embeddings, ad::Var weight, ad::Var bias) {
  std::vector<ad::Var> out;
  out.reserve(embeddings.rows());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    out.push_back(ad::add(ad::matmul(weight, ad::row(embeddings, i)), bias));
  }
  return out;
}

GatLayerResult gat_layer(std::span<const ad::Var> previous, const DiscourseGraph& graph,
                         ad::Var attention_weight) {
  if (previous.size() != graph.size()) {
    throw ShapeError("gat_layer: " + std::to_string(previous.size()) + " states for a graph of " +
                     std::to_string(graph.size()) + " nodes");
  }
  GatLayerResult out;
  out.states.reserve(previous.size());
  out.attention.resize(previous.size());
  for (std::size_t i = 0; i < previous.size(); ++i) {
    const auto preds = graph.predecessors(i);
    if (preds.empty()) {
      out.states.push_back(previous[i]);
      continue;
    }
    std::vector<ad::Var> scores;
    scores.reserve(preds.size());
    for (std::size_t j : preds) {
      scores.push_back(ad::matmul(attention_weight, ad::concat(out.states[j], previous[i])));
    }
    std::vector<std::size_t> active(preds.size());
    for (std::size_t k = 0; k < active.size(); ++k) active[k] = k;
    const ad::Var alpha = ad::softmax_masked(ad::concat(scores), active);

    ad::Var acc = previous[i];
    for (std::size_t k = 0; k < preds.size(); ++k) {
      acc = ad::add(acc, ad::matmul(out.states[preds[k]], ad::row(alpha, k)));
    }
    out.states.push_back(acc);
    out.attention[i] = alpha;
  }
  return out;
}

std::vector<ad::Var> gat_encode(ad::Var embeddings, const DiscourseGraph& graph,
                                const BoundParams& params) {
  std::vector<ad::Var> states = down_project(embeddings, params.down_weight, params.down_bias);
  for (const ad::Var& weight : params.attention) {
    states = gat_layer(states, graph, weight).states;
  }
  return states;
}

CellState zero_state(ad::Tape& tape, std::size_t dim_h) {
  return {tape.constant(Tensor(dim_h, 1)), tape.constant(Tensor(dim_h, 1))};
}

CellStep disclstm_cell(ad::Var input, ad::Var graph_state, const CellState& previous,
                       const BoundCell& cell) {
  CellStep step;
  for (Gate g : kGates) {
    const BoundGate& p = cell[g];
    ad::Var pre = ad::matmul(p.input, input);
    if (p.recurrent) pre = ad::add(pre, ad::matmul(*p.recurrent, previous.h));
    if (p.graph) pre = ad::add(pre, ad::matmul(*p.graph, graph_state));
    pre = ad::add(pre, p.bias);
    const bool candidate = g == Gate::kCandidate || g == Gate::kGraphCandidate;
    step.activations[static_cast<std::size_t>(g)] = candidate ? ad::tanh(pre) : ad::sigmoid(pre);
  }
  ad::Var c = ad::hadamard(step[Gate::kForget], previous.c);
  c = ad::add(c, ad::hadamard(step[Gate::kInput], step[Gate::kCandidate]));
  c = ad::add(c, ad::hadamard(step[Gate::kGraphGate], step[Gate::kGraphCandidate]));
  step.c = c;
  step.h = ad::hadamard(step[Gate::kOutput], ad::tanh(c));
  return step;
}

std::vector<ad::Var> run_bidirectional(std::span<const ad::Var> inputs,
                                       std::span<const ad::Var> graph_states,
                                       const BoundParams& params) {
  if (inputs.size() != graph_states.size()) {
    throw ShapeError("run_bidirectional: input and graph sequences differ in length");
  }
  const std::size_t n = inputs.size();
  if (n == 0) return {};
  ad::Tape& tape = inputs.front().tape();
  const std::size_t dim_h = params.config.dim_h;

  std::vector<ad::Var> fwd(n), bwd(n);
  CellState state = zero_state(tape, dim_h);
  for (std::size_t t = 0; t < n; ++t) {
    const CellStep s = disclstm_cell(inputs[t], graph_states[t], state,
                                     params.cells[static_cast<std::size_t>(Direction::kForward)]);
    state = {s.h, s.c};
    fwd[t] = s.h;
  }
  state = zero_state(tape, dim_h);
  for (std::size_t t = n; t-- > 0;) {
    const CellStep s = disclstm_cell(inputs[t], graph_states[t], state,
                                     params.cells[static_cast<std::size_t>(Direction::kBackward)]);
    state = {s.h, s.c};
    bwd[t] = s.h;
  }
  std::vector<ad::Var> out;
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.push_back(ad::concat(fwd[t], bwd[t]));
  return out;
}

std::vector<ad::Var> classify(std::span<const ad::Var> hidden, ad::Var weight, ad::Var bias) {
  std::vector<ad::Var> out;
  out.reserve(hidden.size());
  for (const ad::Var& h : hidden) out.push_back(ad::add(ad::matmul(weight, h), bias));
  return out;
}

std::vector<ad::Var> forward(ad::Tape& tape, const BoundParams& params, const Tensor& embeddings,
                             const DiscourseGraph& graph) {
  if (embeddings.cols() != params.config.dim_u) {
    throw ShapeError("forward: embedding width " + std::to_string(embeddings.cols()) +
                     " but model expects " + std::to_string(params.config.dim_u));
  }
  if (embeddings.rows() != graph.size()) {
    throw ShapeError("forward: " + std::to_string(embeddings.rows()) +
                     " embedding rows for a graph of " + std::to_string(graph.size()) + " nodes");
  }
  const ad::Var u = tape.constant(embeddings);
  const std::vector<ad::Var> graph_states = gat_encode(u, graph, params);
  std::vector<ad::Var> inputs;
  inputs.reserve(embeddings.rows());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) inputs.push_back(ad::row(u, i));
  const std::vector<ad::Var> hidden = run_bidirectional(inputs, graph_states, params);
  return classify(hidden, params.head_weight, params.head_bias);
}

// ---------------------------------------------------------------------------

Tensor forward_logits(const ModelParams& params, const Tensor& embeddings,
                      const DiscourseGraph& graph) {
  ad::Tape tape;
  const BoundParams bound = bind(tape, params);
  const std::vector<ad::Var> logits = forward(tape, bound, embeddings, graph);
  Tensor out(logits.size(), params.config.num_classes);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Tensor& z = logits[i].value();
    for (std::size_t c = 0; c < z.size(); ++c) out(i, c) = z[c];
  }
  return out;
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  std::vector<std::size_t> out(logits.rows(), 0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, out[i])) out[i] = c;
    }
  }
  return out;
}

std::vector<std::size_t> predict(const ModelParams& params, const Tensor& embeddings,
                                 const DiscourseGraph& graph) {
  return argmax_rows(forward_logits(params, embeddings, graph));
}

// ---------------------------------------------------------------------------

VanillaLstmParams vanilla_view(const CellParams& cell) {
  constexpr std::array<Gate, 4> order = {Gate::kForget, Gate::kInput, Gate::kOutput,
                                         Gate::kCandidate};
  VanillaLstmParams p;
  for (std::size_t k = 0; k < order.size(); ++k) {
    p.input[k] = cell[order[k]].input;
    p.recurrent[k] = *cell[order[k]].recurrent;
    p.bias[k] = cell[order[k]].bias;
  }
  return p;
}

PlainCellState vanilla_lstm_reference(const Tensor& input, const PlainCellState& previous,
                                      const VanillaLstmParams& params) {
  const std::size_t dim_h = params.bias[0].rows();
  if (input.rows() != params.input[0].cols() || previous.h.rows() != dim_h ||
      previous.c.rows() != dim_h) {
    throw ShapeError("vanilla_lstm_reference: shape mismatch");
  }
  auto pre = [&](std::size_t k, std::size_t r) {
    double s = 0.0;
    for (std::size_t j = 0; j < input.rows(); ++j) s += params.input[k](r, j) * input[j];
    double rec = 0.0;
    for (std::size_t j = 0; j < dim_h; ++j) rec += params.recurrent[k](r, j) * previous.h[j];
    return s + rec + params.bias[k][r];
  };
  PlainCellState next{Tensor(dim_h, 1), Tensor(dim_h, 1)};
  for (std::size_t r = 0; r < dim_h; ++r) {
    const double f = ad::stable_sigmoid(pre(0, r));
    const double i = ad::stable_sigmoid(pre(1, r));
    const double o = ad::stable_sigmoid(pre(2, r));
    const double cand = std::tanh(pre(3, r));
    next.c[r] = f * previous.c[r] + i * cand;
    next.h[r] = o * std::tanh(next.c[r]);
  }
  return next;
}

}  // namespace disclstm
