#include "prise/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "prise/adam.hpp"
#include "prise/rng.hpp"

namespace prise {

namespace {

const char* mode_name(SceneEncoderMode mode) {
  return mode == SceneEncoderMode::contrast_finetuned ? "contrast_finetuned"
                                                      : "raw_pretrained_analogue";
}

SceneEncoderMode mode_from_name(const std::string& name) {
  if (name == "contrast_finetuned") return SceneEncoderMode::contrast_finetuned;
  if (name == "raw_pretrained_analogue") return SceneEncoderMode::raw_pretrained_analogue;
  throw DataError("unknown scene encoder mode '" + name + "'");
}

void check_config(const TrainConfig& config) {
  if (config.lr < 0.0) throw UsageError("training config: lr must be non-negative");
  if (config.epochs < 1) throw UsageError("training config: epochs must be at least 1");
  if (config.batch_size < 1) throw UsageError("training config: batch_size must be at least 1");
  if (config.rgcn_depth < 0) throw UsageError("training config: rgcn_depth must be >= 0");
  if (config.hidden_dim < 1) throw UsageError("training config: hidden_dim must be positive");
  if (config.mask.enabled_count() == 0)
    throw UsageError("training config: at least one feature stream must stay enabled");
}

void check_datasets(const Dataset& train_set, const Dataset& val_set) {
  if (train_set.records.empty()) throw DataError("training set is empty");
  if (val_set.records.empty()) throw DataError("validation set is empty");
  if (train_set.feature_dim != val_set.feature_dim)
    throw DataError("training and validation sets disagree on the feature size");
  if (train_set.n_classes != val_set.n_classes)
    throw DataError("training and validation sets disagree on the class count");
  bool any_labeled = false;
  for (const ImageRecord& r : train_set.records)
    if (r.n_persons >= 2 && !r.pair_labels.empty()) any_labeled = true;
  if (!any_labeled) throw DataError("training set has no labeled pairs");
}

struct LiftedModel {
  RgcnParamValues rgcn;
  MlpParamValues mlp;
  Value scene_weight, scene_bias;  // valid only when the encoder is finetuned
};

}  // namespace

TrainResult train_prise(const Dataset& train_set, const Dataset& val_set,
                        const TrainConfig& config,
                        const std::optional<SceneEncoder>& scene_encoder) {
  check_config(config);
  check_datasets(train_set, val_set);
  const std::int64_t f = train_set.feature_dim;
  const std::int64_t n_classes = train_set.n_classes;

  TrainResult result;
  result.model.mask = config.mask;
  result.model.zero_fill = config.zero_fill;
  result.model.rgcn = init_rgcn_params(f, config.rgcn_depth, derive_seed(config.seed, "train.rgcn"));
  result.model.mlp = init_mlp_params(fused_dim(config.mask, f, config.zero_fill),
                                     config.hidden_dim, n_classes,
                                     derive_seed(config.seed, "train.mlp"));
  if (config.mask.scene && config.scene_encoder_mode == SceneEncoderMode::contrast_finetuned) {
    if (!scene_encoder)
      throw UsageError("the scene stream is enabled but no scene encoder was supplied");
    if (scene_encoder->weight.rows() != f)
      throw DataError("scene encoder was trained for feature size " +
                      std::to_string(scene_encoder->weight.rows()) + ", dataset has " +
                      std::to_string(f));
    result.model.scene_encoder = *scene_encoder;
  } else {
    result.model.scene_encoder = init_identity_encoder(f);
  }

  PriseModel model = result.model;
  const bool finetune = config.finetune_scene_encoder && config.mask.scene;

  Adam opt(AdamConfig{.lr = config.lr, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8});
  const auto slot_proj = opt.add_slot(model.rgcn.input_projection.shape(), "rgcn.input_projection");
  std::vector<std::int64_t> slot_layers;
  for (std::size_t t = 0; t < model.rgcn.layer_weights.size(); ++t)
    slot_layers.push_back(
        opt.add_slot(model.rgcn.layer_weights[t].shape(), "rgcn.layer." + std::to_string(t)));
  const auto slot_w1 = opt.add_slot(model.mlp.w1.shape(), "mlp.w1");
  const auto slot_b1 = opt.add_slot(model.mlp.b1.shape(), "mlp.b1");
  const auto slot_w2 = opt.add_slot(model.mlp.w2.shape(), "mlp.w2");
  const auto slot_b2 = opt.add_slot(model.mlp.b2.shape(), "mlp.b2");
  std::int64_t slot_scene_w = -1, slot_scene_b = -1;
  if (finetune) {
    slot_scene_w = opt.add_slot(model.scene_encoder.weight.shape(), "scene_encoder.weight");
    slot_scene_b = opt.add_slot(model.scene_encoder.bias.shape(), "scene_encoder.bias");
  }

  for (const ImageRecord& r : train_set.records)
    if (r.n_persons < 2 || r.pair_labels.empty()) result.skipped_images += 1;

  const std::int64_t n_images = static_cast<std::int64_t>(train_set.records.size());
  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "train.epoch", epoch));
    std::vector<std::int64_t> order(static_cast<std::size_t>(n_images));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    double loss_sum = 0.0;
    double weight_total = 0.0;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t end =
          std::min(cursor + static_cast<std::size_t>(config.batch_size), order.size());
      Tape tape;
      LiftedModel lifted;
      lifted.rgcn = lift_params(tape, model.rgcn, true);
      lifted.mlp = lift_params(tape, model.mlp, true);
      if (finetune) {
        lifted.scene_weight = tape.parameter(model.scene_encoder.weight);
        lifted.scene_bias = tape.parameter(model.scene_encoder.bias);
      }

      std::vector<Value> weighted_losses;
      double batch_weight = 0.0;
      for (std::size_t k = cursor; k < end; ++k) {
        const ImageRecord& record = train_set.records[static_cast<std::size_t>(order[k])];
        if (record.n_persons < 2 || record.pair_labels.empty()) continue;
        const GraphStateValues state = rgcn_forward(tape, build_graph(record), lifted.rgcn);
        const Value scene =
            finetune ? extract_scene_feature(tape.constant(record.raw_scene_input),
                                             lifted.scene_weight, lifted.scene_bias)
                     : tape.constant(config.mask.scene
                                         ? extract_scene_feature(record, model.scene_encoder)
                                         : Tensor::zeros({f}));
        const auto features = assemble_pair_features(tape, state, record, scene, config.mask,
                                                     config.zero_fill);
        std::vector<Value> logits;
        logits.reserve(features.size());
        for (const auto& feature : features) logits.push_back(mlp_logits(feature.fused, lifted.mlp));
        const TapeLossResult image_loss = classification_loss(
            tape, features, logits, record.pair_labels, config.class_weights, false);
        weighted_losses.push_back(scale(image_loss.loss, image_loss.weight_sum));
        batch_weight += image_loss.weight_sum;
      }
      cursor = end;
      if (weighted_losses.empty()) continue;

      const Value batch_loss = scale(sum(concat(weighted_losses)), 1.0 / batch_weight);
      const double loss_value = batch_loss.value().item();
      if (!std::isfinite(loss_value))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch));
      loss_sum += loss_value * batch_weight;
      weight_total += batch_weight;

      tape.backward(batch_loss);
      opt.step(slot_proj, model.rgcn.input_projection, tape.gradient(lifted.rgcn.input_projection));
      for (std::size_t t = 0; t < slot_layers.size(); ++t)
        opt.step(slot_layers[t], model.rgcn.layer_weights[t],
                 tape.gradient(lifted.rgcn.layer_weights[t]));
      opt.step(slot_w1, model.mlp.w1, tape.gradient(lifted.mlp.w1));
      opt.step(slot_b1, model.mlp.b1, tape.gradient(lifted.mlp.b1));
      opt.step(slot_w2, model.mlp.w2, tape.gradient(lifted.mlp.w2));
      opt.step(slot_b2, model.mlp.b2, tape.gradient(lifted.mlp.b2));
      if (finetune) {
        opt.step(slot_scene_w, model.scene_encoder.weight, tape.gradient(lifted.scene_weight));
        opt.step(slot_scene_b, model.scene_encoder.bias, tape.gradient(lifted.scene_bias));
      }
    }

    const MetricReport val = evaluate_model(model, val_set);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = weight_total > 0.0 ? loss_sum / weight_total : 0.0;
    stats.val_accuracy = val.accuracy;
    stats.val_map = val.map;
    result.history.push_back(stats);

    if (val.accuracy > result.best_val_accuracy || result.best_epoch < 0) {
      result.best_val_accuracy = val.accuracy;
      result.best_epoch = epoch;
      result.model = model;
      if (!config.checkpoint_path.empty())
        save_checkpoint(model_to_checkpoint(model, config, epoch, result.history),
                        config.checkpoint_path);
    }
  }
  return result;
}

MetricReport evaluate_model(const PriseModel& model, const Dataset& dataset) {
  std::vector<ScoredPrediction> predictions;
  for (const ImageRecord& record : dataset.records) {
    if (record.n_persons < 2 || record.pair_labels.empty()) continue;
    const RelationPrediction prediction = predict_image(record, model);
    for (const auto& [pair, label] : record.pair_labels) {
      const std::int64_t idx = pair_index(record.n_persons, pair.first, pair.second);
      predictions.push_back(
          {label, prediction.probabilities[static_cast<std::size_t>(idx)].to_vector()});
    }
  }
  if (predictions.empty()) throw DataError("evaluation set has no labeled pairs");
  return compute_metrics(predictions, dataset.n_classes);
}

Checkpoint model_to_checkpoint(const PriseModel& model, const TrainConfig& config,
                               std::int64_t epoch, const std::vector<EpochStats>& history) {
  nlohmann::json meta;
  meta["kind"] = "prise";
  meta["f"] = model.rgcn.feature_dim();
  meta["classes"] = model.mlp.n_classes();
  meta["rgcn_depth"] = model.rgcn.depth();
  meta["hidden_dim"] = model.mlp.hidden_dim();
  meta["fusion_order"] = "interactive,foreground,background,scene";
  meta["mask"] = {{"interactive", model.mask.interactive},
                  {"scene", model.mask.scene},
                  {"foreground", model.mask.foreground},
                  {"background", model.mask.background}};
  meta["zero_fill"] = model.zero_fill;
  meta["scene_encoder_mode"] = mode_name(config.scene_encoder_mode);
  meta["finetune_scene_encoder"] = config.finetune_scene_encoder;
  meta["lr"] = config.lr;
  meta["epochs"] = config.epochs;
  meta["batch_size"] = config.batch_size;
  meta["seed"] = config.seed;
  meta["epoch"] = epoch;
  nlohmann::json history_json = nlohmann::json::array();
  for (const EpochStats& s : history)
    history_json.push_back({{"epoch", s.epoch},
                            {"train_loss", s.train_loss},
                            {"val_accuracy", s.val_accuracy},
                            {"val_map", s.val_map}});
  meta["history"] = std::move(history_json);

  Checkpoint ckpt;
  ckpt.meta_json = meta.dump();
  ckpt.tensors.emplace_back("rgcn.input_projection", model.rgcn.input_projection);
  for (std::size_t t = 0; t < model.rgcn.layer_weights.size(); ++t)
    ckpt.tensors.emplace_back("rgcn.layer." + std::to_string(t), model.rgcn.layer_weights[t]);
  ckpt.tensors.emplace_back("mlp.w1", model.mlp.w1);
  ckpt.tensors.emplace_back("mlp.b1", model.mlp.b1);
  ckpt.tensors.emplace_back("mlp.w2", model.mlp.w2);
  ckpt.tensors.emplace_back("mlp.b2", model.mlp.b2);
  ckpt.tensors.emplace_back("scene_encoder.weight", model.scene_encoder.weight);
  ckpt.tensors.emplace_back("scene_encoder.bias", model.scene_encoder.bias);
  return ckpt;
}

PriseModel model_from_checkpoint(const Checkpoint& checkpoint) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(checkpoint.meta_json);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint meta is not valid JSON: ") + e.what());
  }
  if (!meta.contains("kind") || meta["kind"] != "prise")
    throw DataError("checkpoint is not a full model checkpoint");
  PriseModel model;
  try {
    const std::int64_t depth = meta.at("rgcn_depth").get<std::int64_t>();
    model.rgcn.input_projection = checkpoint.tensor("rgcn.input_projection");
    for (std::int64_t t = 0; t <= depth; ++t)
      model.rgcn.layer_weights.push_back(checkpoint.tensor("rgcn.layer." + std::to_string(t)));
    model.mlp.w1 = checkpoint.tensor("mlp.w1");
    model.mlp.b1 = checkpoint.tensor("mlp.b1");
    model.mlp.w2 = checkpoint.tensor("mlp.w2");
    model.mlp.b2 = checkpoint.tensor("mlp.b2");
    model.scene_encoder.weight = checkpoint.tensor("scene_encoder.weight");
    model.scene_encoder.bias = checkpoint.tensor("scene_encoder.bias");
    const auto& mask = meta.at("mask");
    model.mask.interactive = mask.at("interactive").get<bool>();
    model.mask.scene = mask.at("scene").get<bool>();
    model.mask.foreground = mask.at("foreground").get<bool>();
    model.mask.background = mask.at("background").get<bool>();
    model.zero_fill = meta.at("zero_fill").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint meta is missing a field: ") + e.what());
  }
  return model;
}

MetricReport evaluate_checkpoint(const Checkpoint& checkpoint, const Dataset& dataset) {
  const PriseModel model = model_from_checkpoint(checkpoint);
  const nlohmann::json meta = nlohmann::json::parse(checkpoint.meta_json);
  const std::int64_t classes = meta.at("classes").get<std::int64_t>();
  const std::int64_t f = meta.at("f").get<std::int64_t>();
  if (classes != dataset.n_classes)
    throw DataError("checkpoint was trained for " + std::to_string(classes) +
                    " classes, dataset has " + std::to_string(dataset.n_classes));
  if (f != dataset.feature_dim)
    throw DataError("checkpoint was trained for feature size " + std::to_string(f) +
                    ", dataset has " + std::to_string(dataset.feature_dim));
  return evaluate_model(model, dataset);
}

double majority_class_baseline(const Dataset& train_set, const Dataset& eval_set) {
  std::map<std::int64_t, std::int64_t> counts;
  for (const ImageRecord& r : train_set.records)
    for (const auto& [pair, label] : r.pair_labels) counts[label] += 1;
  if (counts.empty()) throw DataError("majority baseline: training set has no labels");
  std::int64_t majority = counts.begin()->first;
  for (const auto& [label, count] : counts)
    if (count > counts[majority]) majority = label;

  std::int64_t hits = 0, total = 0;
  for (const ImageRecord& r : eval_set.records)
    for (const auto& [pair, label] : r.pair_labels) {
      hits += (label == majority) ? 1 : 0;
      ++total;
    }
  if (total == 0) throw DataError("majority baseline: evaluation set has no labels");
  return static_cast<double>(hits) / static_cast<double>(total);
}

SplitIndices split_dataset(std::int64_t n_images, double val_fraction, double test_fraction,
                           std::uint64_t seed) {
  if (n_images < 1) throw UsageError("split: need at least one image");
  if (val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0)
    throw UsageError("split: fractions must be non-negative and sum below 1");
  std::vector<std::int64_t> order(static_cast<std::size_t>(n_images));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  const auto n_val = static_cast<std::int64_t>(std::llround(
      static_cast<double>(n_images) * val_fraction));
  const auto n_test = static_cast<std::int64_t>(std::llround(
      static_cast<double>(n_images) * test_fraction));
  SplitIndices split;
  split.train.assign(order.begin(), order.end() - n_val - n_test);
  split.val.assign(order.end() - n_val - n_test, order.end() - n_test);
  split.test.assign(order.end() - n_test, order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  if (split.train.empty()) throw UsageError("split: no images left for training");
  return split;
}

std::vector<std::string> format_metric_report(const MetricReport& report) {
  std::vector<std::string> lines;
  lines.push_back("accuracy\t" + format_double(report.accuracy));
  lines.push_back("map\t" + format_double(report.map));
  lines.push_back("samples\t" + std::to_string(report.n_samples));
  for (std::size_t c = 0; c < report.per_class_recall.size(); ++c) {
    const auto& recall = report.per_class_recall[c];
    lines.push_back("recall.class_" + std::to_string(c) + "\t" +
                    (recall ? format_double(*recall) : "undefined"));
  }
  for (std::size_t c = 0; c < report.per_class_ap.size(); ++c) {
    const auto& ap = report.per_class_ap[c];
    lines.push_back("ap.class_" + std::to_string(c) + "\t" +
                    (ap ? format_double(*ap) : "undefined"));
  }
  return lines;
}

std::string metric_report_json(const MetricReport& report) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  j["map"] = report.map;
  j["samples"] = report.n_samples;
  nlohmann::json recalls = nlohmann::json::array();
  for (const auto& recall : report.per_class_recall)
    recalls.push_back(recall ? nlohmann::json(*recall) : nlohmann::json(nullptr));
  j["per_class_recall"] = std::move(recalls);
  nlohmann::json aps = nlohmann::json::array();
  for (const auto& ap : report.per_class_ap)
    aps.push_back(ap ? nlohmann::json(*ap) : nlohmann::json(nullptr));
  j["per_class_ap"] = std::move(aps);
  j["classes_without_positives"] = report.classes_without_positives;
  j["confusion"] = report.confusion;
  return j.dump();
}

}  // namespace prise
