#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "metric_oracles.hpp"
#include "prise/metrics.hpp"
#include "prise/rng.hpp"

using prise::ScoredPrediction;

namespace {

std::vector<ScoredPrediction> random_predictions(std::int64_t n, std::int64_t classes,
                                                 prise::Rng& rng, bool distinct_scores) {
  std::vector<ScoredPrediction> preds;
  for (std::int64_t i = 0; i < n; ++i) {
    ScoredPrediction p;
    p.true_class = rng.uniform_int(0, classes - 1);
    for (std::int64_t c = 0; c < classes; ++c)
      p.scores.push_back(distinct_scores ? rng.uniform() : rng.uniform_int(0, 3) * 0.25);
    preds.push_back(p);
  }
  return preds;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("argmax ties break toward the lowest class") {
  CHECK(prise::argmax_class({0.2, 0.5, 0.5}) == 1);
  CHECK(prise::argmax_class({0.5, 0.5, 0.5}) == 0);
  CHECK(prise::argmax_class({0.1, 0.0, 0.6}) == 2);
}

TEST_CASE("accuracy counts argmax hits") {
  std::vector<ScoredPrediction> preds{
      {0, {0.8, 0.2}}, {1, {0.3, 0.7}}, {0, {0.4, 0.6}}, {1, {0.1, 0.9}}};
  CHECK(prise::accuracy(preds) == 0.75);
  preds[2].scores = {0.9, 0.1};
  CHECK(prise::accuracy(preds) == 1.0);
  CHECK_THROWS_AS(prise::accuracy({}), prise::DataError);
}

TEST_CASE("per-class recall counts per true class") {
  const std::vector<ScoredPrediction> preds{
      {0, {0.8, 0.2}}, {0, {0.2, 0.8}}, {0, {0.9, 0.1}}, {1, {0.3, 0.7}}};
  const auto recall = prise::per_class_recall(preds, 2);
  REQUIRE(recall.size() == 2);
  CHECK(*recall[0] == doctest::Approx(2.0 / 3.0));
  CHECK(*recall[1] == 1.0);
}

TEST_CASE("absent classes get the undefined marker") {
  const std::vector<ScoredPrediction> preds{{0, {0.8, 0.1, 0.1}}, {0, {0.6, 0.2, 0.2}}};
  const auto recall = prise::per_class_recall(preds, 3);
  CHECK(recall[0].has_value());
  CHECK(!recall[1].has_value());
  CHECK(!recall[2].has_value());
}

TEST_CASE("perfect ranking gives AP one") {
  std::vector<ScoredPrediction> preds;
  for (int i = 0; i < 5; ++i) preds.push_back({0, {1.0 - 0.01 * i, 0.0}});
  for (int i = 0; i < 5; ++i) preds.push_back({1, {0.5 - 0.01 * i, 1.0 - 0.01 * i}});
  const auto r = prise::mean_average_precision(preds, 2);
  CHECK(*r.per_class_ap[0] == 1.0);
  CHECK(*r.per_class_ap[1] == 1.0);
  CHECK(r.map == 1.0);
}

TEST_CASE("single positive at rank k scores one over k") {
  // One positive for class 0 ranked third by class-0 score.
  std::vector<ScoredPrediction> preds{
      {1, {0.9, 0.6}}, {1, {0.8, 0.7}}, {0, {0.7, 0.1}}, {1, {0.1, 0.8}}};
  const auto r = prise::mean_average_precision(preds, 2);
  CHECK(*r.per_class_ap[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("classes without positives are excluded and reported") {
  const std::vector<ScoredPrediction> preds{{0, {0.8, 0.2, 0.4}}, {0, {0.6, 0.1, 0.2}}};
  const auto r = prise::mean_average_precision(preds, 3);
  CHECK(r.per_class_ap[0].has_value());
  CHECK(!r.per_class_ap[1].has_value());
  CHECK(!r.per_class_ap[2].has_value());
  REQUIRE(r.classes_without_positives.size() == 2);
  CHECK(r.classes_without_positives[0] == 1);
  CHECK(r.classes_without_positives[1] == 2);
  CHECK(r.map == *r.per_class_ap[0]);
}

TEST_CASE("mAP matches the precision-recall reference on random instances") {
  prise::Rng rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    const std::int64_t n = rng.uniform_int(2, 20);
    const std::int64_t classes = rng.uniform_int(2, 4);
    const auto preds = random_predictions(n, classes, rng, true);
    prise::MapResult got;
    try {
      got = prise::mean_average_precision(preds, classes);
    } catch (const prise::DataError&) {
      continue;  // no class had a positive
    }
    for (std::int64_t c = 0; c < classes; ++c) {
      std::vector<double> scores;
      std::vector<bool> pos;
      for (const auto& p : preds) {
        scores.push_back(p.scores[static_cast<std::size_t>(c)]);
        pos.push_back(p.true_class == c);
      }
      if (!got.per_class_ap[static_cast<std::size_t>(c)]) continue;
      const double ref = prise::testing::ap_reference(scores, pos);
      CHECK(std::fabs(*got.per_class_ap[static_cast<std::size_t>(c)] - ref) <= 1e-9);
    }
  }
}

TEST_CASE("metrics are invariant under input reordering") {
  prise::Rng rng(505);
  auto preds = random_predictions(40, 3, rng, true);
  const auto base = prise::compute_metrics(preds, 3);
  rng.shuffle(preds);
  const auto moved = prise::compute_metrics(preds, 3);
  CHECK(base.accuracy == moved.accuracy);
  CHECK(base.map == moved.map);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(base.per_class_recall[c] == moved.per_class_recall[c]);
    CHECK(base.per_class_ap[c] == moved.per_class_ap[c]);
  }
}

TEST_CASE("auc handles perfect, random and tied score sets") {
  CHECK(prise::auc({0.9, 0.8, 0.2, 0.1}, {true, true, false, false}) == 1.0);
  CHECK(prise::auc({0.1, 0.2, 0.8, 0.9}, {true, true, false, false}) == 0.0);
  CHECK(prise::auc({0.5, 0.5, 0.5, 0.5}, {true, true, false, false}) == 0.5);
  CHECK_THROWS_AS(prise::auc({0.5, 0.6}, {true, true}), prise::DataError);
  CHECK_THROWS_AS(prise::auc({0.5}, {}), prise::ShapeError);
}

TEST_CASE("auc matches the hand-enumerated four-sample case") {
  // Pairs: (0.7,0.6) win, (0.7,0.3) win, (0.4,0.6) loss, (0.4,0.3) win.
  const double got = prise::auc({0.7, 0.4, 0.6, 0.3}, {true, true, false, false});
  CHECK(got == 0.75);
}

TEST_CASE("auc matches the pair-enumeration reference on random instances") {
  prise::Rng rng(606);
  for (int trial = 0; trial < 300; ++trial) {
    const std::int64_t n = rng.uniform_int(2, 20);
    std::vector<double> scores;
    std::vector<bool> labels;
    bool has_pos = false, has_neg = false;
    for (std::int64_t i = 0; i < n; ++i) {
      scores.push_back(rng.uniform_int(0, 5) * 0.2);  // force frequent ties
      const bool l = rng.uniform() < 0.5;
      labels.push_back(l);
      has_pos = has_pos || l;
      has_neg = has_neg || !l;
    }
    if (!has_pos || !has_neg) continue;
    const double ref = prise::testing::auc_reference(scores, labels);
    CHECK(std::fabs(prise::auc(scores, labels) - ref) <= 1e-9);
  }
}

TEST_CASE("compute_metrics fills the confusion matrix consistently") {
  prise::Rng rng(707);
  const auto preds = random_predictions(60, 3, rng, true);
  const auto report = prise::compute_metrics(preds, 3);
  CHECK(report.n_samples == 60);
  std::int64_t total = 0, diag = 0;
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p) {
      total += report.confusion[t][p];
      if (t == p) diag += report.confusion[t][p];
    }
  CHECK(total == 60);
  CHECK(report.accuracy == doctest::Approx(static_cast<double>(diag) / 60.0).epsilon(1e-15));
}

TEST_CASE("the accuracy-recall identity is checked on every evaluation") {
  prise::Rng rng(808);
  for (int trial = 0; trial < 50; ++trial) {
    const auto preds = random_predictions(rng.uniform_int(1, 30), 4, rng, false);
    CHECK_NOTHROW(prise::compute_metrics(preds, 4));
  }
}

TEST_CASE("malformed inputs are rejected") {
  CHECK_THROWS_AS(prise::compute_metrics({{5, {1.0, 0.0}}}, 2), prise::DataError);
  CHECK_THROWS_AS(prise::compute_metrics({{0, {1.0}}}, 2), prise::ShapeError);
  CHECK_THROWS_AS(prise::compute_metrics({{0, {std::nan(""), 0.0}}}, 2), prise::NumericError);
}

}  // TEST_SUITE
