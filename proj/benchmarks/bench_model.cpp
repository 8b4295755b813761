#include <benchmark/benchmark.h>

#include <vector>

#include "disclstm/model.hpp"
#include "disclstm/rng.hpp"
#include "disclstm/training.hpp"

using namespace disclstm;

namespace {

ModelConfig config_for(std::int64_t width) {
  const auto w = static_cast<std::size_t>(width);
  return {.dim_u = 4 * w, .dim_g = w, .dim_h = w, .layers = 2, .num_classes = 7};
}

Tensor random_embeddings(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Tensor u(n, dim);
  for (double& v : u.data()) v = rng.uniform(-1.0, 1.0);
  return u;
}

DiscourseGraph reply_chain(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i < n; ++i) {
    edges.push_back({i - 1, i});
    if (i >= 2) edges.push_back({i - 2, i});
  }
  return build_graph(n, edges);
}

void BM_CellStep(benchmark::State& state) {
  const ModelConfig cfg = config_for(state.range(0));
  const ModelParams p = init_params(cfg, 0);
  const Tensor u = random_embeddings(cfg.dim_u, 1, 1);
  const Tensor g = random_embeddings(cfg.dim_g, 1, 2);
  for (auto _ : state) {
    ad::Tape tape;
    const BoundParams b = bind(tape, p);
    const CellStep s = disclstm_cell(tape.constant(u), tape.constant(g), zero_state(tape, cfg.dim_h),
                                     b.cells[0]);
    benchmark::DoNotOptimize(s.h.value().data().data());
  }
}
BENCHMARK(BM_CellStep)->Arg(16)->Arg(64)->Arg(300);

void BM_GatLayer(benchmark::State& state) {
  const ModelConfig cfg = config_for(64);
  const ModelParams p = init_params(cfg, 0);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor u = random_embeddings(n, cfg.dim_u, 3);
  const DiscourseGraph graph = reply_chain(n);
  for (auto _ : state) {
    ad::Tape tape;
    const BoundParams b = bind(tape, p);
    const auto g = gat_encode(tape.constant(u), graph, b);
    benchmark::DoNotOptimize(g.back().value().data().data());
  }
}
BENCHMARK(BM_GatLayer)->Arg(8)->Arg(32);

void BM_ForwardBackward(benchmark::State& state) {
  const ModelConfig cfg = config_for(state.range(0));
  const ModelParams p = init_params(cfg, 0);
  const std::size_t n = 10;
  const Tensor u = random_embeddings(n, cfg.dim_u, 4);
  const DiscourseGraph graph = reply_chain(n);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % cfg.num_classes;
  for (auto _ : state) {
    ad::Tape tape;
    const BoundParams b = bind(tape, p);
    const auto logits = forward(tape, b, u, graph);
    const ad::Var loss = dialogue_loss_sum(logits, labels);
    tape.backward(loss);
    ModelParams grads = ModelParams::zeros(cfg);
    accumulate_gradients(tape, b, grads);
    benchmark::DoNotOptimize(grads.head.bias.data().data());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
