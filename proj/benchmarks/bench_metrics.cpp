#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "prise/metrics.hpp"
#include "prise/rng.hpp"

namespace {

using namespace prise;

std::vector<ScoredPrediction> make_predictions(std::int64_t n, std::int64_t n_classes, Rng& rng) {
  std::vector<ScoredPrediction> preds;
  preds.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    ScoredPrediction p;
    p.true_class = rng.uniform_int(0, n_classes - 1);
    for (std::int64_t c = 0; c < n_classes; ++c) p.scores.push_back(rng.uniform());
    preds.push_back(std::move(p));
  }
  return preds;
}

void BM_Auc(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  Rng rng(23);
  std::vector<double> scores;
  std::vector<bool> labels;
  for (std::int64_t i = 0; i < n; ++i) {
    scores.push_back(rng.uniform());
    labels.push_back(rng.uniform() < 0.5);
  }
  labels[0] = true;
  labels[static_cast<std::size_t>(n - 1)] = false;
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, labels));
}

void BM_MeanAveragePrecision(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  const std::int64_t n_classes = 6;
  Rng rng(29);
  const auto preds = make_predictions(n, n_classes, rng);
  for (auto _ : state) {
    const MapResult result = mean_average_precision(preds, n_classes);
    benchmark::DoNotOptimize(result.map);
  }
}

void BM_FullMetricReport(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  const std::int64_t n_classes = 6;
  Rng rng(31);
  const auto preds = make_predictions(n, n_classes, rng);
  for (auto _ : state) {
    const MetricReport report = compute_metrics(preds, n_classes);
    benchmark::DoNotOptimize(report.accuracy);
  }
}

}  // namespace

BENCHMARK(BM_Auc)->Arg(100)->Arg(1000)->Arg(10000);
BENCHMARK(BM_MeanAveragePrecision)->Arg(100)->Arg(1000)->Arg(10000);
BENCHMARK(BM_FullMetricReport)->Arg(100)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
