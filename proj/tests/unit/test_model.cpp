#include <doctest.h>

#include <cmath>
#include <vector>

#include "../support/reference.hpp"
#include "disclstm/error.hpp"
#include "disclstm/model.hpp"
#include "helpers.hpp"

using namespace disclstm;
using disclstm::testing::random_tensor;
using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

namespace {

ModelParams random_params(const ModelConfig& cfg, std::uint64_t seed, double scale = 1.0) {
  ModelParams p = ModelParams::zeros(cfg);
  Rng rng(seed);
  for_each_parameter(p, [&](const std::string&, Tensor& t) {
    for (double& v : t.data()) v = rng.uniform(-scale, scale);
  });
  return p;
}

// 0.3*sin(0.7*k + 0.1) over the running canonical index, mirroring
// tests/oracles/forward_oracle.py.
ModelParams sine_params(const ModelConfig& cfg) {
  ModelParams p = ModelParams::zeros(cfg);
  std::size_t k = 0;
  for_each_parameter(p, [&](const std::string&, Tensor& t) {
    for (double& v : t.data()) v = 0.3 * std::sin(0.7 * static_cast<double>(k++) + 0.1);
  });
  return p;
}

Tensor cosine_embeddings(std::size_t n, std::size_t dim) {
  Tensor u(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) u(i, j) = 0.5 * std::cos(1.3 * i + 0.4 * j);
  }
  return u;
}

std::vector<ad::Var> columns(ad::Tape& tape, const std::vector<std::vector<double>>& rows) {
  std::vector<ad::Var> out;
  for (const auto& r : rows) out.push_back(tape.constant(Tensor::column(r)));
  return out;
}

double max_diff(const Tensor& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

BoundCell bind_cell(ad::Tape& tape, const CellParams& cell) {
  BoundCell b;
  for (Gate g : kGates) {
    const GateParams& p = cell[g];
    BoundGate& out = b.gates[static_cast<std::size_t>(g)];
    out.input = tape.parameter(p.input);
    if (p.recurrent) out.recurrent = tape.parameter(*p.recurrent);
    if (p.graph) out.graph = tape.parameter(*p.graph);
    out.bias = tape.parameter(p.bias);
  }
  return b;
}

}  // namespace

TEST_CASE("parameter inventory matches the cell equations") {
  const ModelParams p = ModelParams::zeros({.dim_u = 5, .dim_g = 4, .dim_h = 3, .layers = 2, .num_classes = 6});
  for (Direction d : {Direction::kForward, Direction::kBackward}) {
    const CellParams& c = p.cell(d);
    for (Gate g : kGates) {
      CHECK(c[g].input.rows() == 3);
      CHECK(c[g].input.cols() == 5);
      CHECK(c[g].bias.rows() == 3);
      CHECK(c[g].recurrent.has_value() == gate_reads_hidden(g));
      CHECK(c[g].graph.has_value() == gate_reads_graph(g));
      if (c[g].graph) CHECK(c[g].graph->cols() == 4);
    }
    CHECK_FALSE(c[Gate::kGraphGate].recurrent);
    CHECK_FALSE(c[Gate::kGraphCandidate].recurrent);
    CHECK_FALSE(c[Gate::kInput].graph);
    CHECK_FALSE(c[Gate::kCandidate].graph);
  }
  CHECK(p.gat.attention.size() == 2);
  CHECK(p.gat.attention[0].cols() == 8);
  CHECK(p.head.weight.rows() == 6);
  CHECK(p.head.weight.cols() == 6);
}

TEST_CASE("init_params: determinism, bias rule, uniform bound") {
  const ModelConfig cfg{.dim_u = 7, .dim_g = 5, .dim_h = 4, .layers = 2, .num_classes = 3};
  const ModelParams a = init_params(cfg, 42);
  CHECK(a == init_params(cfg, 42));
  CHECK_FALSE(a == init_params(cfg, 43));
  for_each_parameter(a, [&](const std::string& name, const Tensor& t) {
    if (name.ends_with("bias")) {
      const double want = name == "cell.forward.forget.bias" || name == "cell.backward.forget.bias" ? 1.0 : 0.0;
      for (double v : t.data()) CHECK(v == want);
    } else {
      const double fan_in = static_cast<double>(t.cols());
      const double fan_out = static_cast<double>(t.rows());
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (double v : t.data()) CHECK(std::abs(v) <= bound);
    }
  });
}

TEST_CASE("default-size down-projection shape") {
  const ModelParams p = init_params(ModelConfig{}, 0);
  CHECK(p.gat.down_weight.rows() == 300);
  CHECK(p.gat.down_weight.cols() == 1024);
  CHECK_THROWS_AS(init_params({.dim_u = 0}, 0), UsageError);
}

TEST_CASE("flatten and unflatten are inverse") {
  const ModelConfig cfg{.dim_u = 3, .dim_g = 2, .dim_h = 2, .layers = 1, .num_classes = 2};
  const ModelParams p = random_params(cfg, 1);
  ModelParams q = ModelParams::zeros(cfg);
  unflatten(flatten(p), q);
  CHECK(p == q);
}

TEST_CASE("down_project cases") {
  Rng rng(2);
  ad::Tape tape;
  const Tensor u = random_tensor(rng, 2, 4);
  Tensor eye(4, 4);
  for (std::size_t k = 0; k < 4; ++k) eye(k, k) = 1.0;
  const auto same = down_project(tape.constant(u), tape.constant(eye), tape.constant(Tensor(4, 1)));
  for (std::size_t i = 0; i < 2; ++i) CHECK(max_diff(same[i].value(), ref::row_of(u, i)) == 0.0);

  const auto zero = down_project(tape.constant(u), tape.constant(Tensor(3, 4)), tape.constant(Tensor(3, 1)));
  for (const ad::Var& g : zero) {
    for (double v : g.value().data()) CHECK(v == 0.0);
  }

  const Tensor w = random_tensor(rng, 3, 4);
  const Tensor b = random_tensor(rng, 3, 1);
  const auto out = down_project(tape.constant(u), tape.constant(w), tape.constant(b));
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> want = ref::matvec(w, ref::row_of(u, i));
    for (std::size_t r = 0; r < 3; ++r) want[r] += b[r];
    CHECK(max_diff(out[i].value(), want) <= 1e-15);
  }
}

TEST_CASE("gat_layer identity and singleton cases") {
  ad::Tape tape;
  const auto prev = columns(tape, {{1.0, 2.0}, {3.0, -1.0}, {0.5, 0.25}});
  const ad::Var w = tape.constant(Tensor(1, 4, std::vector<double>{0.3, -0.7, 1.1, 0.2}));

  const GatLayerResult none = gat_layer(prev, edgeless_graph(3), w);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(none.states[i].value() == prev[i].value());
    CHECK_FALSE(none.attention[i].has_value());
  }

  const GatLayerResult one = gat_layer(prev, build_graph(3, EdgeList{{0, 2}}), w);
  REQUIRE(one.attention[2].has_value());
  CHECK(one.attention[2]->value()[0] == 1.0);
  CHECK(one.states[2].value()[0] == 1.0 + 0.5);
  CHECK(one.states[2].value()[1] == 2.0 + 0.25);
}

TEST_CASE("gat_layer with equal predecessor states ignores the scores") {
  ad::Tape tape;
  const auto prev = columns(tape, {{0.4, -0.2}, {0.4, -0.2}, {1.0, 1.0}});
  const ad::Var w = tape.constant(Tensor(1, 4, std::vector<double>{5.0, -3.0, 2.0, 7.0}));
  const GatLayerResult r = gat_layer(prev, build_graph(3, EdgeList{{0, 2}, {1, 2}}), w);
  CHECK(std::abs(r.states[2].value()[0] - 1.4) <= 1e-15);
  CHECK(std::abs(r.states[2].value()[1] - 0.8) <= 1e-15);
}

TEST_CASE("gat_layer attention weights from hand-set scores") {
  // Only the predecessor half of the attention row differs between
  // candidates, so alpha = softmax([w.g0, w.g1]) = softmax([0, ln 3]).
  ad::Tape tape;
  const auto prev = columns(tape, {{0.0, 5.0}, {1.0, -2.0}, {0.7, 0.3}});
  const ad::Var w = tape.constant(Tensor(1, 4, std::vector<double>{std::log(3.0), 0.0, 9.0, -4.0}));
  const GatLayerResult r = gat_layer(prev, build_graph(3, EdgeList{{0, 2}, {1, 2}}), w);
  const Tensor& a = r.attention[2]->value();
  CHECK(a[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(a[1] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(r.states[2].value()[0] == doctest::Approx(0.7 + 0.75).epsilon(1e-14));
  CHECK(r.states[2].value()[1] == doctest::Approx(0.3 + 0.25 * 5.0 - 0.75 * 2.0).epsilon(1e-14));
}

TEST_CASE("two-layer chain matches the hand unroll") {
  // g0 = a, layer 1: (a, a+b, a+b+c), layer 2: (a, 2a+b, 3a+2b+c).
  const ModelConfig cfg{.dim_u = 2, .dim_g = 2, .dim_h = 1, .layers = 2, .num_classes = 2};
  ModelParams p = ModelParams::zeros(cfg);
  p.gat.down_weight(0, 0) = 1.0;
  p.gat.down_weight(1, 1) = 1.0;
  p.gat.attention[0] = Tensor(1, 4, std::vector<double>{0.9, -0.4, 0.3, 0.8});
  p.gat.attention[1] = Tensor(1, 4, std::vector<double>{-1.2, 0.5, 0.7, 0.1});
  const Tensor u(3, 2, std::vector<double>{1.0, 2.0, 3.0, -1.0, 0.5, 0.25});

  ad::Tape tape;
  const BoundParams b = bind(tape, p);
  const auto g = gat_encode(tape.constant(u), build_graph(3, EdgeList{{0, 1}, {1, 2}}), b);
  CHECK(g[0].value() == Tensor::column({1.0, 2.0}));
  CHECK(g[1].value() == Tensor::column({5.0, 3.0}));
  CHECK(g[2].value() == Tensor::column({9.5, 4.25}));
}

TEST_CASE("gat_encode composition and edgeless identity") {
  Rng rng(8);
  const ModelConfig cfg{.dim_u = 4, .dim_g = 3, .dim_h = 2, .layers = 3, .num_classes = 2};
  const ModelParams p = random_params(cfg, 8);
  const Tensor u = random_tensor(rng, 5, 4);
  const DiscourseGraph graph = build_graph(5, EdgeList{{0, 1}, {0, 3}, {2, 3}, {1, 4}, {3, 4}});

  ad::Tape tape;
  const BoundParams b = bind(tape, p);
  const auto g1 = down_project(tape.constant(u), b.down_weight, b.down_bias);
  const auto manual = gat_layer(gat_layer(gat_layer(g1, graph, b.attention[0]).states, graph,
                                          b.attention[1]).states,
                                graph, b.attention[2]).states;
  const auto encoded = gat_encode(tape.constant(u), graph, b);
  for (std::size_t i = 0; i < 5; ++i) CHECK(encoded[i].value() == manual[i].value());

  const auto flat = gat_encode(tape.constant(u), edgeless_graph(5), b);
  for (std::size_t i = 0; i < 5; ++i) CHECK(flat[i].value() == g1[i].value());

  const ref::GatTrace trace = ref::gat(p, u, graph);
  for (std::size_t i = 0; i < 5; ++i) CHECK(max_diff(encoded[i].value(), trace.layers.back()[i]) <= 1e-13);
}

TEST_CASE("cell with all-zero parameters") {
  const ModelConfig cfg{.dim_u = 3, .dim_g = 2, .dim_h = 4, .layers = 1, .num_classes = 2};
  const ModelParams p = ModelParams::zeros(cfg);
  ad::Tape tape;
  const BoundCell cell = bind_cell(tape, p.cell(Direction::kForward));
  const ad::Var u = tape.constant(Tensor::column({0.3, -1.0, 2.0}));
  const ad::Var g = tape.constant(Tensor::column({1.0, 1.0}));

  const CellStep rest = disclstm_cell(u, g, zero_state(tape, 4), cell);
  for (double v : rest.h.value().data()) CHECK(v == 0.0);
  for (double v : rest.c.value().data()) CHECK(v == 0.0);

  const CellState ones{tape.constant(Tensor(4, 1, 0.0)), tape.constant(Tensor(4, 1, 1.0))};
  const CellStep s = disclstm_cell(u, g, ones, cell);
  for (double v : s.c.value().data()) CHECK(v == 0.5);
  for (double v : s.h.value().data()) CHECK(std::abs(v - 0.231058) <= 1e-6);
  for (double v : s.h.value().data()) CHECK(v == 0.5 * std::tanh(0.5));

  const VanillaLstmParams zero = vanilla_view(p.cell(Direction::kForward));
  const PlainCellState r0 = vanilla_lstm_reference(Tensor::column({0.3, -1.0, 2.0}),
                                                   {Tensor(4, 1), Tensor(4, 1)}, zero);
  for (double v : r0.h.data()) CHECK(v == 0.0);
  const PlainCellState r1 = vanilla_lstm_reference(Tensor::column({0.3, -1.0, 2.0}),
                                                   {Tensor(4, 1), Tensor(4, 1, 1.0)}, zero);
  for (double v : r1.h.data()) CHECK(std::abs(v - 0.231058) <= 1e-6);
}

TEST_CASE("cell matches the plain reference and reduces to a standard LSTM") {
  const ModelConfig cfg{.dim_u = 5, .dim_g = 3, .dim_h = 4, .layers = 1, .num_classes = 2};
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    ModelParams p = random_params(cfg, 100 + trial, 1.5);
    const Tensor u = random_tensor(rng, 5, 1);
    const Tensor g = random_tensor(rng, 3, 1);
    const Tensor h0 = random_tensor(rng, 4, 1, -1.0, 1.0);
    const Tensor c0 = random_tensor(rng, 4, 1);

    ad::Tape tape;
    const CellStep full = disclstm_cell(tape.constant(u), tape.constant(g),
                                        {tape.constant(h0), tape.constant(c0)},
                                        bind_cell(tape, p.cell(Direction::kForward)));
    const ref::CellOut want = ref::cell(p.cell(Direction::kForward), ref::column(u), ref::column(g),
                                        ref::column(h0), ref::column(c0));
    CHECK(max_diff(full.h.value(), want.h) <= 1e-14);
    CHECK(max_diff(full.c.value(), want.c) <= 1e-14);
    CHECK(max_diff(full[Gate::kGraphGate].value(), want.p) <= 1e-15);

    CellParams& cell = p.cell(Direction::kForward);
    cell[Gate::kGraphCandidate].input.fill(0.0);
    cell[Gate::kGraphCandidate].graph->fill(0.0);
    cell[Gate::kGraphCandidate].bias.fill(0.0);
    cell[Gate::kForget].graph->fill(0.0);
    cell[Gate::kOutput].graph->fill(0.0);
    ad::Tape tape2;
    const CellStep reduced = disclstm_cell(tape2.constant(u), tape2.constant(g),
                                           {tape2.constant(h0), tape2.constant(c0)},
                                           bind_cell(tape2, cell));
    const PlainCellState vanilla = vanilla_lstm_reference(u, {h0, c0}, vanilla_view(cell));
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::abs(reduced.h.value()[k] - vanilla.h[k]) <= 1e-12);
      CHECK(std::abs(reduced.c.value()[k] - vanilla.c[k]) <= 1e-12);
    }
  }
}

TEST_CASE("bidirectional pass") {
  const ModelConfig cfg{.dim_u = 3, .dim_g = 2, .dim_h = 2, .layers = 1, .num_classes = 2};
  Rng rng(17);

  ModelParams shared = random_params(cfg, 3);
  shared.cell(Direction::kBackward) = shared.cell(Direction::kForward);
  {
    ad::Tape tape;
    const BoundParams b = bind(tape, shared);
    const std::vector<ad::Var> u = {tape.constant(random_tensor(rng, 3, 1))};
    const std::vector<ad::Var> g = {tape.constant(random_tensor(rng, 2, 1))};
    const auto h = run_bidirectional(u, g, b);
    REQUIRE(h.size() == 1);
    CHECK(h[0].rows() == 4);
    CHECK(h[0].value()[0] == h[0].value()[2]);
    CHECK(h[0].value()[1] == h[0].value()[3]);
  }
  {
    const ModelParams zero = ModelParams::zeros(cfg);
    ad::Tape tape;
    const BoundParams b = bind(tape, zero);
    const auto u = columns(tape, {{1.0, 2.0, 3.0}, {-1.0, 0.0, 1.0}});
    const auto g = columns(tape, {{0.5, 0.5}, {1.0, -1.0}});
    for (const ad::Var& h : run_bidirectional(u, g, b)) {
      for (double v : h.value().data()) CHECK(v == 0.0);
    }
  }
  {
    const ModelParams p = random_params(cfg, 4);
    ad::Tape tape;
    const BoundParams b = bind(tape, p);
    std::vector<std::vector<double>> u_rows, g_rows;
    for (int t = 0; t < 2; ++t) {
      u_rows.push_back(ref::column(random_tensor(rng, 3, 1)));
      g_rows.push_back(ref::column(random_tensor(rng, 2, 1)));
    }
    const auto h = run_bidirectional(columns(tape, u_rows), columns(tape, g_rows), b);
    const auto want = ref::bidirectional(p, u_rows, g_rows);
    for (std::size_t t = 0; t < 2; ++t) CHECK(max_diff(h[t].value(), want[t]) <= 1e-14);
  }
}

TEST_CASE("classify and argmax") {
  const ModelConfig cfg{.dim_u = 3, .dim_g = 2, .dim_h = 2, .layers = 1, .num_classes = 4};
  ModelParams p = random_params(cfg, 5);
  Rng rng(6);
  const Tensor u = random_tensor(rng, 3, 3);
  const DiscourseGraph graph = build_graph(3, EdgeList{{0, 2}});

  p.head.weight.fill(0.0);
  p.head.bias.fill(0.0);
  const Tensor zero = forward_logits(p, u, graph);
  for (double v : zero.data()) CHECK(v == 0.0);
  CHECK(predict(p, u, graph) == std::vector<std::size_t>{0, 0, 0});

  p.head.bias[2] = 10.0;
  CHECK(predict(p, u, graph) == std::vector<std::size_t>{2, 2, 2});

  ad::Tape tape;
  const Tensor w = random_tensor(rng, 4, 4);
  const Tensor b = random_tensor(rng, 4, 1);
  const auto hidden = columns(tape, {{0.1, 0.2, -0.3, 0.4}, {-0.5, 0.0, 0.9, 0.2}});
  const auto logits = classify(hidden, tape.constant(w), tape.constant(b));
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> want = ref::matvec(w, ref::column(hidden[i].value()));
    for (std::size_t r = 0; r < 4; ++r) want[r] += b[r];
    CHECK(max_diff(logits[i].value(), want) <= 1e-15);
  }
  CHECK(argmax_rows(Tensor(2, 3, std::vector<double>{1, 3, 3, 2, 2, 2})) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("forward: frozen oracle logits") {
  {
    const ModelConfig cfg{.dim_u = 4, .dim_g = 3, .dim_h = 2, .layers = 1, .num_classes = 2};
    const Tensor logits = forward_logits(sine_params(cfg), cosine_embeddings(3, 4),
                                         build_graph(3, EdgeList{{0, 1}, {0, 2}, {1, 2}}));
    const std::vector<double> want = {-0.025094771290366247, -0.28218904791664606,
                                      -0.029547823841132023, -0.2768280940868292,
                                      -0.040420401286951416, -0.25935928828635335};
    CHECK(max_diff(logits, want) <= 1e-12);
  }
  {
    const ModelConfig cfg{.dim_u = 5, .dim_g = 3, .dim_h = 2, .layers = 2, .num_classes = 3};
    const Tensor logits = forward_logits(sine_params(cfg), cosine_embeddings(4, 5),
                                         build_graph(4, EdgeList{{0, 2}, {1, 2}, {2, 3}}));
    const std::vector<double> want = {
        -0.3596870172698703, -0.20032203658601672, -0.28415835573223414,
        -0.3723099257214294, -0.19278131326627337, -0.28574552323400065,
        -0.38704987877372143, -0.16154635669965928, -0.329866117955467,
        -0.3838735522975274, -0.12562176465112534, -0.4007403508467338};
    CHECK(max_diff(logits, want) <= 1e-12);
  }
}

TEST_CASE("forward: shape, purity, reference agreement, input checks") {
  Rng rng(19);
  const ModelConfig cfg{.dim_u = 6, .dim_g = 4, .dim_h = 3, .layers = 2, .num_classes = 5};
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams p = random_params(cfg, 200 + trial);
    const std::size_t n = 1 + rng.below(8);
    const Tensor u = random_tensor(rng, n, 6);
    EdgeList edges;
    for (std::size_t t = 1; t < n; ++t) {
      for (std::size_t s = 0; s < t; ++s) {
        if (rng.bernoulli(0.35)) edges.push_back({s, t});
      }
    }
    const DiscourseGraph graph = build_graph(n, edges);
    const Tensor logits = forward_logits(p, u, graph);
    CHECK(logits.rows() == n);
    CHECK(logits.cols() == 5);
    CHECK(forward_logits(p, u, graph) == logits);
    const auto want = ref::logits(p, u, graph);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 5; ++c) CHECK(std::abs(logits(i, c) - want[i][c]) <= 1e-12);
    }
  }
  const ModelParams p = random_params(cfg, 1);
  CHECK_THROWS_AS(forward_logits(p, Tensor(3, 5), edgeless_graph(3)), ShapeError);
  CHECK_THROWS_AS(forward_logits(p, Tensor(3, 6), edgeless_graph(4)), ShapeError);
}
