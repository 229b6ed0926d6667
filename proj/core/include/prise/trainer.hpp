#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prise/checkpoint.hpp"
#include "prise/dataset.hpp"
#include "prise/metrics.hpp"
#include "prise/relation_head.hpp"
#include "prise/scene_contrast.hpp"

namespace prise {

enum class SceneEncoderMode {
  contrast_finetuned,        // use the supplied contrastively trained encoder
  raw_pretrained_analogue,   // identity-initialized encoder, never finetuned
};

struct TrainConfig {
  double lr = 5e-5;
  std::int64_t epochs = 20;
  std::int64_t batch_size = 32;  // images per batch; an image's pairs stay together
  std::int64_t rgcn_depth = 2;
  std::int64_t hidden_dim = 256;
  std::uint64_t seed = 0;
  StreamMask mask;
  bool zero_fill = false;
  SceneEncoderMode scene_encoder_mode = SceneEncoderMode::contrast_finetuned;
  bool finetune_scene_encoder = false;  // frozen by default
  std::optional<std::vector<double>> class_weights;
  std::string checkpoint_path;  // empty disables on-disk checkpoints
};

struct EpochStats {
  std::int64_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_map = 0.0;
};

struct TrainResult {
  PriseModel model;  // the best-validation-accuracy state
  std::vector<EpochStats> history;
  std::int64_t best_epoch = -1;
  double best_val_accuracy = 0.0;
  std::int64_t skipped_images = 0;  // single-person images carry no pairs
};

/// Seeded mini-batch Adam over the classification loss of every labeled
/// pair. Validation runs each epoch; the best state is kept (and written
/// to config.checkpoint_path when set). The scene encoder is required
/// exactly when the scene stream is enabled in contrast_finetuned mode.
TrainResult train_prise(const Dataset& train_set, const Dataset& val_set,
                        const TrainConfig& config,
                        const std::optional<SceneEncoder>& scene_encoder = std::nullopt);

/// Scores every labeled pair of the dataset with the model.
MetricReport evaluate_model(const PriseModel& model, const Dataset& dataset);

/// Serialization for full models; meta carries the config snapshot, the
/// stream fusion order, the epoch and the metric history.
Checkpoint model_to_checkpoint(const PriseModel& model, const TrainConfig& config,
                               std::int64_t epoch, const std::vector<EpochStats>& history);
PriseModel model_from_checkpoint(const Checkpoint& checkpoint);

/// Rebuilds the model from the checkpoint and evaluates it. Rejects a
/// dataset whose class count or feature size disagrees with the
/// checkpoint's meta.
MetricReport evaluate_checkpoint(const Checkpoint& checkpoint, const Dataset& dataset);

/// Accuracy on `eval_set` of always predicting `train_set`'s most
/// frequent pair label (ties to the lowest class id).
double majority_class_baseline(const Dataset& train_set, const Dataset& eval_set);

struct SplitIndices {
  std::vector<std::int64_t> train;
  std::vector<std::int64_t> val;
  std::vector<std::int64_t> test;
};

/// Seeded shuffled split by image. Fractions apply to the image count;
/// training receives the remainder.
SplitIndices split_dataset(std::int64_t n_images, double val_fraction, double test_fraction,
                           std::uint64_t seed);

/// `name<TAB>value` lines: accuracy, mAP, per-class recall and AP.
std::vector<std::string> format_metric_report(const MetricReport& report);

/// The same report as a JSON object string.
std::string metric_report_json(const MetricReport& report);

}  // namespace prise
