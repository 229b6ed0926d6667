#include "prise/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prise {

std::int64_t argmax_class(const std::vector<double>& scores) {
  if (scores.empty()) throw DataError("argmax_class: empty score vector");
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = c;
  return static_cast<std::int64_t>(best);
}

namespace {

void check_predictions(const std::vector<ScoredPrediction>& predictions, std::int64_t n_classes) {
  if (predictions.empty()) throw DataError("metrics: empty prediction set");
  for (const ScoredPrediction& p : predictions) {
    if (static_cast<std::int64_t>(p.scores.size()) != n_classes)
      throw ShapeError("metrics: prediction has " + std::to_string(p.scores.size()) +
                       " scores for " + std::to_string(n_classes) + " classes");
    if (p.true_class < 0 || p.true_class >= n_classes)
      throw DataError("metrics: true class " + std::to_string(p.true_class) +
                      " out of range for " + std::to_string(n_classes) + " classes");
    for (const double s : p.scores)
      if (!std::isfinite(s)) throw NumericError("metrics: non-finite score");
  }
}

}  // namespace

double accuracy(const std::vector<ScoredPrediction>& predictions) {
  if (predictions.empty()) throw DataError("accuracy: empty prediction set");
  std::int64_t correct = 0;
  for (const ScoredPrediction& p : predictions)
    if (argmax_class(p.scores) == p.true_class) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

std::vector<std::optional<double>> per_class_recall(
    const std::vector<ScoredPrediction>& predictions, std::int64_t n_classes) {
  check_predictions(predictions, n_classes);
  std::vector<std::int64_t> total(static_cast<std::size_t>(n_classes), 0);
  std::vector<std::int64_t> correct(static_cast<std::size_t>(n_classes), 0);
  for (const ScoredPrediction& p : predictions) {
    const std::size_t c = static_cast<std::size_t>(p.true_class);
    total[c] += 1;
    if (argmax_class(p.scores) == p.true_class) correct[c] += 1;
  }
  std::vector<std::optional<double>> recall(static_cast<std::size_t>(n_classes));
  for (std::size_t c = 0; c < recall.size(); ++c)
    if (total[c] > 0)
      recall[c] = static_cast<double>(correct[c]) / static_cast<double>(total[c]);
  return recall;
}

MapResult mean_average_precision(const std::vector<ScoredPrediction>& predictions,
                                 std::int64_t n_classes) {
  check_predictions(predictions, n_classes);
  MapResult result;
  result.per_class_ap.resize(static_cast<std::size_t>(n_classes));
  double ap_sum = 0.0;
  std::int64_t ap_count = 0;
  for (std::int64_t c = 0; c < n_classes; ++c) {
    std::vector<std::size_t> order(predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return predictions[a].scores[static_cast<std::size_t>(c)] >
             predictions[b].scores[static_cast<std::size_t>(c)];
    });
    std::int64_t hits = 0;
    double precision_sum = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      if (predictions[order[rank]].true_class != c) continue;
      hits += 1;
      precision_sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
    if (hits == 0) {
      result.classes_without_positives.push_back(c);
      continue;
    }
    const double ap = precision_sum / static_cast<double>(hits);
    result.per_class_ap[static_cast<std::size_t>(c)] = ap;
    ap_sum += ap;
    ap_count += 1;
  }
  if (ap_count == 0) throw DataError("mean_average_precision: no class has a positive sample");
  result.map = ap_sum / static_cast<double>(ap_count);
  return result;
}

double auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size())
    throw ShapeError("auc: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  std::int64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NumericError("auc: non-finite score");
    (labels[i] ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) throw DataError("auc: both classes must be present");

  // Rank-sum with average ranks over ties gives the ties-count-half
  // probability exactly.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(pos);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

MetricReport compute_metrics(const std::vector<ScoredPrediction>& predictions,
                             std::int64_t n_classes) {
  check_predictions(predictions, n_classes);
  MetricReport report;
  report.n_samples = static_cast<std::int64_t>(predictions.size());
  report.accuracy = accuracy(predictions);
  report.per_class_recall = per_class_recall(predictions, n_classes);
  const MapResult map = mean_average_precision(predictions, n_classes);
  report.map = map.map;
  report.per_class_ap = map.per_class_ap;
  report.classes_without_positives = map.classes_without_positives;
  report.confusion.assign(static_cast<std::size_t>(n_classes),
                          std::vector<std::int64_t>(static_cast<std::size_t>(n_classes), 0));
  std::vector<std::int64_t> class_total(static_cast<std::size_t>(n_classes), 0);
  for (const ScoredPrediction& p : predictions) {
    const std::size_t t = static_cast<std::size_t>(p.true_class);
    report.confusion[t][static_cast<std::size_t>(argmax_class(p.scores))] += 1;
    class_total[t] += 1;
  }

  double weighted_recall = 0.0;
  for (std::size_t c = 0; c < report.per_class_recall.size(); ++c)
    if (report.per_class_recall[c])
      weighted_recall += (static_cast<double>(class_total[c]) /
                          static_cast<double>(report.n_samples)) *
                         *report.per_class_recall[c];
  if (std::fabs(weighted_recall - report.accuracy) > 1e-12)
    throw NumericError("metrics: accuracy " + format_double(report.accuracy) +
                       " disagrees with frequency-weighted recall " +
                       format_double(weighted_recall));
  return report;
}

}  // namespace prise
