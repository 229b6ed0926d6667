#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "prise/tensor.hpp"

namespace prise {

struct ScoredPrediction {
  std::int64_t true_class = 0;
  std::vector<double> scores;  // one score per class
};

struct MetricReport {
  double accuracy = 0.0;
  std::vector<std::optional<double>> per_class_recall;  // empty optional: class absent
  double map = 0.0;
  std::vector<std::optional<double>> per_class_ap;      // empty optional: no positives
  std::vector<std::int64_t> classes_without_positives;  // excluded from the mAP mean
  std::vector<std::vector<std::int64_t>> confusion;     // [true][predicted]
  std::int64_t n_samples = 0;
};

/// Argmax with ties broken toward the lowest class index.
std::int64_t argmax_class(const std::vector<double>& scores);

double accuracy(const std::vector<ScoredPrediction>& predictions);

std::vector<std::optional<double>> per_class_recall(
    const std::vector<ScoredPrediction>& predictions, std::int64_t n_classes);

struct MapResult {
  double map = 0.0;
  std::vector<std::optional<double>> per_class_ap;
  std::vector<std::int64_t> classes_without_positives;
};

/// Non-interpolated average precision per class: samples ranked by the
/// class score descending, ties kept in input order, AP = mean of
/// precision at each positive hit. Classes without positives are
/// excluded from the mean and reported.
MapResult mean_average_precision(const std::vector<ScoredPrediction>& predictions,
                                 std::int64_t n_classes);

/// Mann-Whitney AUC: probability a positive outscores a negative, ties
/// counting one half. Throws unless both labels occur.
double auc(const std::vector<double>& scores, const std::vector<bool>& labels);

/// All classification metrics in one pass. Checks the identity that
/// accuracy equals the class-frequency-weighted mean of recalls and
/// throws NumericError if it fails.
MetricReport compute_metrics(const std::vector<ScoredPrediction>& predictions,
                             std::int64_t n_classes);

}  // namespace prise
