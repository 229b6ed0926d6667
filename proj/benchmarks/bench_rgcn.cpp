#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "prise/autograd.hpp"
#include "prise/dataset.hpp"
#include "prise/rgcn.hpp"
#include "prise/rng.hpp"
#include "prise/tensor.hpp"

namespace {

using namespace prise;

PersonGraph make_graph(std::int64_t n, std::int64_t f, Rng& rng) {
  PersonGraph graph;
  graph.n_persons = n;
  for (std::int64_t i = 0; i < n; ++i) {
    Tensor x = Tensor::zeros({f});
    double* d = x.mutable_data();
    for (std::int64_t k = 0; k < f; ++k) d[k] = rng.uniform(-1.0, 1.0);
    graph.node_features.push_back(std::move(x));
  }
  graph.edge_list = all_pairs(n);
  return graph;
}

void BM_GraphForward(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  const std::int64_t f = state.range(1);
  const std::int64_t depth = state.range(2);
  Rng rng(42);
  const PersonGraph graph = make_graph(n, f, rng);
  const RgcnParams params = init_rgcn_params(f, depth, 7);
  for (auto _ : state) {
    const GraphState out = rgcn_forward(graph, params);
    benchmark::DoNotOptimize(out.fused_edges.front().data());
  }
}

void BM_GraphForwardBackward(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  const std::int64_t f = state.range(1);
  const std::int64_t depth = state.range(2);
  Rng rng(42);
  const PersonGraph graph = make_graph(n, f, rng);
  const RgcnParams params = init_rgcn_params(f, depth, 7);
  for (auto _ : state) {
    Tape tape;
    const RgcnParamValues values = lift_params(tape, params, true);
    const GraphStateValues out = rgcn_forward(tape, graph, values);
    std::vector<Value> parts = out.fused_edges;
    const Value loss = sum(concat(parts));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.gradient(values.input_projection).data());
  }
}

}  // namespace

BENCHMARK(BM_GraphForward)
    ->Args({3, 64, 2})
    ->Args({5, 64, 2})
    ->Args({5, 256, 2})
    ->Args({5, 2048, 2})
    ->Unit(benchmark::kMillisecond);

BENCHMARK(BM_GraphForwardBackward)
    ->Args({3, 64, 2})
    ->Args({5, 64, 2})
    ->Args({5, 256, 2})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
