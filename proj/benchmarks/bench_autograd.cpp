#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "prise/autograd.hpp"
#include "prise/rng.hpp"
#include "prise/tensor.hpp"

namespace {

using namespace prise;

Tensor random_matrix(std::int64_t rows, std::int64_t cols, Rng& rng) {
  Tensor t = Tensor::zeros({rows, cols});
  double* d = t.mutable_data();
  for (std::int64_t i = 0; i < rows * cols; ++i) d[i] = rng.uniform(-1.0, 1.0);
  return t;
}

Tensor random_vector(std::int64_t n, Rng& rng) {
  Tensor t = Tensor::zeros({n});
  double* d = t.mutable_data();
  for (std::int64_t i = 0; i < n; ++i) d[i] = rng.uniform(-1.0, 1.0);
  return t;
}

// One affine + rectifier step repeated `depth` times, then the scalar
// reduction and the full reverse sweep.
void BM_TapeAffineChain(benchmark::State& state) {
  const std::int64_t f = state.range(0);
  const std::int64_t depth = state.range(1);
  Rng rng(11);
  const Tensor w = random_matrix(f, f, rng);
  const Tensor b = random_vector(f, rng);
  const Tensor x = random_vector(f, rng);
  for (auto _ : state) {
    Tape tape;
    const Value wv = tape.parameter(w);
    const Value bv = tape.parameter(b);
    Value h = tape.constant(x);
    for (std::int64_t t = 0; t < depth; ++t) h = relu(affine(wv, h, bv));
    const Value loss = sum(h);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.gradient(wv).data());
  }
}

// Tape bookkeeping cost in isolation: many tiny nodes, no heavy math.
void BM_TapeSmallNodes(benchmark::State& state) {
  const std::int64_t nodes = state.range(0);
  Rng rng(13);
  const Tensor x = random_vector(8, rng);
  for (auto _ : state) {
    Tape tape;
    Value v = tape.parameter(x);
    for (std::int64_t i = 0; i < nodes; ++i) v = scale(add(v, v), 0.5);
    const Value loss = sum(v);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.gradient(v).data());
  }
}

void BM_MatmulVector(benchmark::State& state) {
  const std::int64_t f = state.range(0);
  Rng rng(17);
  const Tensor w = random_matrix(f, f, rng);
  const Tensor x = random_vector(f, rng);
  for (auto _ : state) {
    Tape tape;
    const Value wv = tape.constant(w);
    const Value xv = tape.constant(x);
    const Value y = matmul(wv, xv);
    benchmark::DoNotOptimize(y.value().data());
  }
}

}  // namespace

BENCHMARK(BM_TapeAffineChain)->Args({64, 4})->Args({256, 4})->Args({1024, 4});
BENCHMARK(BM_TapeSmallNodes)->Arg(100)->Arg(1000)->Arg(10000);
BENCHMARK(BM_MatmulVector)->Arg(64)->Arg(256)->Arg(1024)->Arg(2048);

BENCHMARK_MAIN();
