// Command-line front end: wires dataset generation, pool building,
// contrastive pretraining, relation training, evaluation, ablation and
// inference into reproducible seeded runs. Every run that produces an
// artifact drops a .run.json manifest next to it.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prise/ablation.hpp"
#include "prise/checkpoint.hpp"
#include "prise/dataset.hpp"
#include "prise/errors.hpp"
#include "prise/manifest.hpp"
#include "prise/relation_head.hpp"
#include "prise/rng.hpp"
#include "prise/scene_contrast.hpp"
#include "prise/synth.hpp"
#include "prise/tensor.hpp"
#include "prise/trainer.hpp"

namespace {

using namespace prise;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

struct CommonOpts {
  bool deterministic = false;
  std::int64_t workers = 1;
};

void add_common_flags(CLI::App* cmd, CommonOpts& common) {
  cmd->add_flag("--deterministic", common.deterministic,
                "force serial, bit-reproducible execution (env PRISE_DETERMINISTIC=1)")
      ->envname("PRISE_DETERMINISTIC");
  cmd->add_option("--workers", common.workers,
                  "upper bound on worker threads; execution is serial today, so any "
                  "bound is honored")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

// Every worker bound collapses to 1 in deterministic mode.
std::int64_t effective_workers(const CommonOpts& common) {
  return common.deterministic ? 1 : common.workers;
}

void echo_common(ordered_json& config, const CommonOpts& common) {
  config["deterministic"] = common.deterministic;
  config["workers"] = effective_workers(common);
}

// A dataset argument may name the file itself or a directory holding
// the conventional dataset.jsonl.
std::string resolve_dataset_path(const std::string& path) {
  if (path.empty()) return path;
  if (path.back() == '/') return path + "dataset.jsonl";
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) return path + "/dataset.jsonl";
  return path;
}

void ensure_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) throw DataError("cannot create directory " + parent.string());
}

void finish_run(const std::string& subcommand, const ordered_json& config, std::uint64_t seed,
                std::vector<std::string> inputs, std::vector<std::string> outputs,
                Clock::time_point start) {
  RunManifest manifest;
  manifest.subcommand = subcommand;
  manifest.config_json = config.dump();
  manifest.seed = seed;
  manifest.input_paths = std::move(inputs);
  manifest.output_paths = std::move(outputs);
  manifest.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  write_manifest(manifest);
}

void emit_report(const std::vector<std::string>& lines, const std::string& path) {
  std::string body;
  for (const auto& line : lines) {
    std::cout << line << "\n";
    body += line;
    body += "\n";
  }
  if (!path.empty()) {
    ensure_parent_dir(path);
    write_text_file_atomically(path, body);
  }
}

SceneEncoder load_scene_encoder(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  std::string kind;
  try {
    kind = nlohmann::json::parse(ckpt.meta_json).value("kind", "");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": unreadable checkpoint metadata: " + e.what());
  }
  if (kind != "contrast")
    throw DataError(path + " is not a scene-contrast checkpoint (kind \"" + kind + "\")");
  return SceneEncoder{ckpt.tensor("scene_encoder.weight"), ckpt.tensor("scene_encoder.bias")};
}

void check_pools_match(const ContrastPools& pools, const Dataset& data,
                       const std::string& pools_path) {
  const auto n = static_cast<std::int64_t>(data.records.size());
  if (static_cast<std::int64_t>(pools.image_ids.size()) != n)
    throw DataError(pools_path + ": pools cover " + std::to_string(pools.image_ids.size()) +
                    " images but the dataset has " + std::to_string(n));
  for (std::int64_t i = 0; i < n; ++i)
    if (pools.image_ids[static_cast<std::size_t>(i)] !=
        data.records[static_cast<std::size_t>(i)].image_id)
      throw DataError(pools_path + ": image order disagrees with the dataset at row " +
                      std::to_string(i));
}

// ---- gen-synthetic ----

struct GenOpts {
  SynthConfig synth;
  std::string out;
  CommonOpts common;
};

void run_gen(const GenOpts& opts) {
  const auto start = Clock::now();
  std::string out_path = opts.out;
  if (!out_path.empty() && out_path.back() == '/') out_path += "dataset.jsonl";
  else {
    std::error_code ec;
    if (std::filesystem::is_directory(out_path, ec)) out_path += "/dataset.jsonl";
  }
  ensure_parent_dir(out_path);

  const SynthResult result = generate_synthetic(opts.synth);
  save_dataset(result.dataset, out_path);
  const DatasetSummary summary = summarize(result.dataset);
  std::cout << "wrote " << summary.n_images << " images (" << summary.n_labeled_pairs
            << " labeled pairs) to " << out_path << "\n";

  ordered_json config;
  config["images"] = opts.synth.n_images;
  config["f"] = opts.synth.feature_dim;
  config["classes"] = opts.synth.n_classes;
  config["scene_types"] = opts.synth.n_scene_types;
  config["min_persons"] = opts.synth.min_persons;
  config["max_persons"] = opts.synth.max_persons;
  config["noise"] = opts.synth.noise;
  config["seed"] = opts.synth.seed;
  config["out"] = out_path;
  echo_common(config, opts.common);
  finish_run("gen-synthetic", config, opts.synth.seed, {}, {out_path}, start);
}

// ---- build-pools ----

struct PoolsOpts {
  std::string data;
  std::string out = "pools.txt";
  PoolConfig pool;
  CommonOpts common;
};

void run_build_pools(PoolsOpts& opts) {
  const auto start = Clock::now();
  const std::string data_path = resolve_dataset_path(opts.data);
  const Dataset data = load_dataset(data_path);
  const ContrastPools pools = build_pools(data.records, opts.pool);
  ensure_parent_dir(opts.out);
  save_pools(pools, opts.out);

  std::int64_t sim = 0, dis = 0;
  for (const auto& p : pools.similar) sim += static_cast<std::int64_t>(p.size());
  for (const auto& p : pools.dissimilar) dis += static_cast<std::int64_t>(p.size());
  std::cout << "built pools for " << pools.image_ids.size() << " images (" << sim
            << " similar entries, " << dis << " dissimilar) to " << opts.out << "\n";

  ordered_json config;
  config["data"] = data_path;
  config["out"] = opts.out;
  config["pool_overlap_k"] = opts.pool.overlap_k;
  config["pool_overlap_strict"] = opts.pool.strict;
  config["cap"] = opts.pool.cap;
  config["seed"] = opts.pool.seed;
  echo_common(config, opts.common);
  finish_run("build-pools", config, opts.pool.seed, {data_path}, {opts.out}, start);
}

// ---- train-contrast ----

struct ContrastOpts {
  std::string data;
  std::string pools;
  std::string out = "contrast_model.bin";
  std::string report;
  ContrastConfig train;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
  CommonOpts common;
};

void run_train_contrast(ContrastOpts& opts) {
  const auto start = Clock::now();
  const std::string data_path = resolve_dataset_path(opts.data);
  const Dataset data = load_dataset(data_path);
  const ContrastPools pools = load_pools(opts.pools);
  check_pools_match(pools, data, opts.pools);

  const SplitIndices split = split_dataset(static_cast<std::int64_t>(data.records.size()),
                                           opts.val_fraction, opts.test_fraction,
                                           opts.train.seed);
  ensure_parent_dir(opts.out);
  opts.train.checkpoint_path = opts.out;
  const ContrastTrainResult result =
      train_contrast(data, pools, split.train, split.val, opts.train);

  std::vector<std::string> lines;
  for (const auto& e : result.history)
    lines.push_back("epoch\t" + std::to_string(e.epoch) + "\ttrain_loss\t" +
                    format_double(e.train_loss) + "\tval_accuracy\t" +
                    format_double(e.val_accuracy) + "\tval_auc\t" + format_double(e.val_auc));
  lines.push_back("best_epoch\t" + std::to_string(result.best_epoch));
  lines.push_back("best_val_auc\t" + format_double(result.best_val_auc));
  lines.push_back("skipped_anchors\t" + std::to_string(result.skipped_anchor_ids.size()));
  if (!split.test.empty()) {
    const ContrastEval test =
        evaluate_contrast(data, pools, split.test, result.encoder, result.scorer,
                          derive_seed(opts.train.seed, "contrast.test"));
    lines.push_back("test_accuracy\t" + format_double(test.accuracy));
    lines.push_back("test_auc\t" + format_double(test.auc));
    lines.push_back("test_triplets\t" + std::to_string(test.triplets));
  }
  emit_report(lines, opts.report);

  ordered_json config;
  config["data"] = data_path;
  config["pools"] = opts.pools;
  config["out"] = opts.out;
  config["report"] = opts.report;
  config["lr"] = opts.train.lr;
  config["epochs"] = opts.train.epochs;
  config["batch"] = opts.train.batch_size;
  config["seed"] = opts.train.seed;
  config["val_fraction"] = opts.val_fraction;
  config["test_fraction"] = opts.test_fraction;
  echo_common(config, opts.common);
  std::vector<std::string> outputs = {opts.out};
  if (!opts.report.empty()) outputs.push_back(opts.report);
  finish_run("train-contrast", config, opts.train.seed, {data_path, opts.pools}, outputs,
             start);
}

// ---- train / ablate shared pieces ----

struct MaskOpts {
  bool no_interactive = false;
  bool no_scene = false;
  bool no_foreground = false;
  bool no_background = false;
  bool zero_fill = false;
};

void add_mask_flags(CLI::App* cmd, MaskOpts& mask) {
  cmd->add_flag("--no-interactive", mask.no_interactive, "drop the pair interaction stream");
  cmd->add_flag("--no-scene", mask.no_scene, "drop the scene stream");
  cmd->add_flag("--no-foreground", mask.no_foreground, "drop the foreground stream");
  cmd->add_flag("--no-background", mask.no_background, "drop the background stream");
  cmd->add_flag("--zero-fill", mask.zero_fill,
                "keep masked stream slots as zeros instead of shrinking the fused vector");
}

StreamMask to_stream_mask(const MaskOpts& mask) {
  StreamMask out;
  out.interactive = !mask.no_interactive;
  out.scene = !mask.no_scene;
  out.foreground = !mask.no_foreground;
  out.background = !mask.no_background;
  return out;
}

// "auto" uses the contrastive encoder exactly when a checkpoint was
// given, so the paper-defaults command line runs without one.
SceneEncoderMode resolve_scene_mode(const std::string& mode, const std::string& scene_ckpt) {
  if (mode == "auto")
    return scene_ckpt.empty() ? SceneEncoderMode::raw_pretrained_analogue
                              : SceneEncoderMode::contrast_finetuned;
  if (mode == "contrast") {
    if (scene_ckpt.empty())
      throw UsageError("--scene-mode contrast needs --scene-ckpt");
    return SceneEncoderMode::contrast_finetuned;
  }
  if (mode == "raw") return SceneEncoderMode::raw_pretrained_analogue;
  throw UsageError("unknown --scene-mode \"" + mode + "\" (auto, contrast or raw)");
}

void echo_train_config(ordered_json& config, const TrainConfig& cfg,
                       const std::string& scene_mode) {
  config["lr"] = cfg.lr;
  config["epochs"] = cfg.epochs;
  config["batch"] = cfg.batch_size;
  config["rgcn_depth"] = cfg.rgcn_depth;
  config["hidden"] = cfg.hidden_dim;
  config["seed"] = cfg.seed;
  config["no_interactive"] = !cfg.mask.interactive;
  config["no_scene"] = !cfg.mask.scene;
  config["no_foreground"] = !cfg.mask.foreground;
  config["no_background"] = !cfg.mask.background;
  config["zero_fill"] = cfg.zero_fill;
  config["scene_mode"] = scene_mode;
  config["finetune_scene_encoder"] = cfg.finetune_scene_encoder;
  if (cfg.class_weights) config["class_weights"] = *cfg.class_weights;
  else config["class_weights"] = nullptr;
}

// ---- train ----

struct TrainOpts {
  std::string data;
  std::string out = "model.bin";
  std::string scene_ckpt;
  std::string report;
  std::string scene_mode = "auto";
  TrainConfig train;
  MaskOpts mask;
  std::vector<double> class_weights;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
  CommonOpts common;
};

void run_train(TrainOpts& opts) {
  const auto start = Clock::now();
  const std::string data_path = resolve_dataset_path(opts.data);
  const Dataset data = load_dataset(data_path);
  const SplitIndices split = split_dataset(static_cast<std::int64_t>(data.records.size()),
                                           opts.val_fraction, opts.test_fraction,
                                           opts.train.seed);
  const Dataset train_set = subset_dataset(data, split.train);
  const Dataset val_set = subset_dataset(data, split.val);

  opts.train.mask = to_stream_mask(opts.mask);
  opts.train.zero_fill = opts.mask.zero_fill;
  opts.train.scene_encoder_mode = resolve_scene_mode(opts.scene_mode, opts.scene_ckpt);
  if (!opts.class_weights.empty()) opts.train.class_weights = opts.class_weights;
  ensure_parent_dir(opts.out);
  opts.train.checkpoint_path = opts.out;

  std::optional<SceneEncoder> encoder;
  if (opts.train.mask.scene &&
      opts.train.scene_encoder_mode == SceneEncoderMode::contrast_finetuned)
    encoder = load_scene_encoder(opts.scene_ckpt);

  const TrainResult result = train_prise(train_set, val_set, opts.train, encoder);

  std::vector<std::string> lines;
  for (const auto& e : result.history)
    lines.push_back("epoch\t" + std::to_string(e.epoch) + "\ttrain_loss\t" +
                    format_double(e.train_loss) + "\tval_accuracy\t" +
                    format_double(e.val_accuracy) + "\tval_map\t" + format_double(e.val_map));
  lines.push_back("best_epoch\t" + std::to_string(result.best_epoch));
  lines.push_back("best_val_accuracy\t" + format_double(result.best_val_accuracy));
  lines.push_back("skipped_images\t" + std::to_string(result.skipped_images));

  const bool have_test = !split.test.empty();
  const Dataset holdout = have_test ? subset_dataset(data, split.test) : val_set;
  const std::string prefix = have_test ? "test." : "val.";
  for (const auto& line : format_metric_report(evaluate_model(result.model, holdout)))
    lines.push_back(prefix + line);
  lines.push_back("majority_baseline\t" +
                  format_double(majority_class_baseline(train_set, holdout)));
  emit_report(lines, opts.report);

  ordered_json config;
  config["data"] = data_path;
  config["out"] = opts.out;
  config["scene_ckpt"] = opts.scene_ckpt;
  config["report"] = opts.report;
  echo_train_config(config, opts.train, opts.scene_mode);
  config["val_fraction"] = opts.val_fraction;
  config["test_fraction"] = opts.test_fraction;
  echo_common(config, opts.common);
  std::vector<std::string> inputs = {data_path};
  if (!opts.scene_ckpt.empty()) inputs.push_back(opts.scene_ckpt);
  std::vector<std::string> outputs = {opts.out};
  if (!opts.report.empty()) outputs.push_back(opts.report);
  finish_run("train", config, opts.train.seed, inputs, outputs, start);
}

// ---- eval ----

struct EvalOpts {
  std::string ckpt;
  std::string data;
  std::string out = "eval_report.txt";
  CommonOpts common;
};

void run_eval(const EvalOpts& opts) {
  const auto start = Clock::now();
  if (opts.ckpt.empty()) throw UsageError("--ckpt is required");
  const Checkpoint ckpt = load_checkpoint(opts.ckpt);
  if (opts.data.empty()) throw UsageError("--data is required");
  const std::string data_path = resolve_dataset_path(opts.data);
  const Dataset data = load_dataset(data_path);

  const MetricReport report = evaluate_checkpoint(ckpt, data);
  std::vector<std::string> lines = format_metric_report(report);
  emit_report(lines, opts.out);

  ordered_json config;
  config["ckpt"] = opts.ckpt;
  config["data"] = data_path;
  config["out"] = opts.out;
  echo_common(config, opts.common);
  finish_run("eval", config, 0, {opts.ckpt, data_path}, {opts.out}, start);
}

// ---- ablate ----

struct AblateOpts {
  std::string data;
  std::string out = "ablation.tsv";
  std::string scene_ckpt;
  std::string scene_mode = "auto";
  std::int64_t repetitions = 5;
  TrainConfig train;
  double val_fraction = 0.15;
  CommonOpts common;
};

void run_ablate(AblateOpts& opts) {
  const auto start = Clock::now();
  const std::string data_path = resolve_dataset_path(opts.data);
  const Dataset data = load_dataset(data_path);
  const SplitIndices split = split_dataset(static_cast<std::int64_t>(data.records.size()),
                                           opts.val_fraction, 0.0, opts.train.seed);
  const Dataset train_set = subset_dataset(data, split.train);
  const Dataset val_set = subset_dataset(data, split.val);

  AblationConfig config;
  opts.train.scene_encoder_mode = resolve_scene_mode(opts.scene_mode, opts.scene_ckpt);
  config.base = opts.train;
  config.repetitions = opts.repetitions;
  if (config.base.scene_encoder_mode == SceneEncoderMode::contrast_finetuned)
    config.scene_encoder = load_scene_encoder(opts.scene_ckpt);

  const AblationTable table = ablation_run(train_set, val_set, config);
  const std::vector<std::string> lines = format_ablation_table(table);
  ensure_parent_dir(opts.out);
  emit_report(lines, opts.out);
  const std::string json_path = opts.out + ".json";
  write_text_file_atomically(json_path, ablation_table_json(table) + "\n");

  ordered_json echo;
  echo["data"] = data_path;
  echo["out"] = opts.out;
  echo["scene_ckpt"] = opts.scene_ckpt;
  echo["reps"] = opts.repetitions;
  echo_train_config(echo, config.base, opts.scene_mode);
  echo["val_fraction"] = opts.val_fraction;
  echo_common(echo, opts.common);
  std::vector<std::string> inputs = {data_path};
  if (!opts.scene_ckpt.empty()) inputs.push_back(opts.scene_ckpt);
  finish_run("ablate", echo, opts.train.seed, inputs, {opts.out, json_path}, start);
}

// ---- infer ----

struct InferOpts {
  std::string ckpt;
  std::string data;
  std::string out = "predictions.txt";
  CommonOpts common;
};

void run_infer(const InferOpts& opts) {
  const auto start = Clock::now();
  if (opts.ckpt.empty()) throw UsageError("--ckpt is required");
  const PriseModel model = model_from_checkpoint(load_checkpoint(opts.ckpt));
  if (opts.data.empty()) throw UsageError("--data is required");
  const std::string data_path = resolve_dataset_path(opts.data);
  const Dataset data = load_dataset(data_path);
  if (data.feature_dim != model.rgcn.feature_dim())
    throw DataError("checkpoint expects feature size " +
                    std::to_string(model.rgcn.feature_dim()) + " but the dataset has " +
                    std::to_string(data.feature_dim));

  std::string body;
  std::int64_t n_lines = 0, n_skipped = 0;
  for (const auto& record : data.records) {
    const RelationPrediction prediction = predict_image(record, model);
    if (!prediction.warning.empty()) {
      std::cerr << prediction.warning << "\n";
      ++n_skipped;
    }
    for (const auto& line : format_prediction_lines(prediction)) {
      body += line;
      body += "\n";
      ++n_lines;
    }
  }
  ensure_parent_dir(opts.out);
  write_text_file_atomically(opts.out, body);
  std::cout << "wrote " << n_lines << " predictions for " << data.records.size()
            << " images (" << n_skipped << " skipped) to " << opts.out << "\n";

  ordered_json config;
  config["ckpt"] = opts.ckpt;
  config["data"] = data_path;
  config["out"] = opts.out;
  echo_common(config, opts.common);
  finish_run("infer", config, 0, {opts.ckpt, data_path}, {opts.out}, start);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"social relation inference on per-image person graphs"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.set_config("--config", "", "read option defaults from a TOML/INI file; "
                 "command-line flags win over file values");
  app.require_subcommand(1);

  std::function<void()> action;

  GenOpts gen;
  {
    CLI::App* cmd = app.add_subcommand("gen-synthetic", "generate a synthetic dataset");
    cmd->option_defaults()->always_capture_default();
    cmd->add_option("--images", gen.synth.n_images, "number of images")->capture_default_str();
    cmd->add_option("--f", gen.synth.feature_dim, "feature size")->capture_default_str();
    cmd->add_option("--classes", gen.synth.n_classes, "relation classes")->capture_default_str();
    cmd->add_option("--scene-types", gen.synth.n_scene_types, "latent scene types")
        ->capture_default_str();
    cmd->add_option("--min-persons", gen.synth.min_persons, "fewest persons per image")
        ->capture_default_str();
    cmd->add_option("--max-persons", gen.synth.max_persons, "most persons per image")
        ->capture_default_str();
    cmd->add_option("--noise", gen.synth.noise, "noise scale")->capture_default_str();
    cmd->add_option("--seed", gen.synth.seed, "master seed")->capture_default_str();
    cmd->add_option("--out", gen.out, "output dataset file, or a directory for dataset.jsonl")
        ->required();
    add_common_flags(cmd, gen.common);
    cmd->callback([&] { action = [&] { run_gen(gen); }; });
  }

  PoolsOpts pools;
  {
    CLI::App* cmd = app.add_subcommand("build-pools",
                                       "build per-image similar/dissimilar pools");
    cmd->add_option("--data", pools.data, "dataset file or directory")->required();
    cmd->add_option("--out", pools.out, "pools file")->capture_default_str();
    cmd->add_option("--pool-overlap-k", pools.pool.overlap_k,
                    "top-5 overlap threshold for scene similarity")
        ->capture_default_str();
    cmd->add_option("--pool-overlap-strict", pools.pool.strict,
                    "1: similar needs overlap above the threshold; 0: equal counts too")
        ->capture_default_str();
    cmd->add_option("--cap", pools.pool.cap, "per-pool size cap")->capture_default_str();
    cmd->add_option("--seed", pools.pool.seed, "master seed")->capture_default_str();
    add_common_flags(cmd, pools.common);
    cmd->callback([&] { action = [&] { run_build_pools(pools); }; });
  }

  ContrastOpts contrast;
  {
    CLI::App* cmd = app.add_subcommand("train-contrast",
                                       "contrastively train the scene encoder");
    cmd->add_option("--data", contrast.data, "dataset file or directory")->required();
    cmd->add_option("--pools", contrast.pools, "pools file from build-pools")->required();
    cmd->add_option("--out", contrast.out, "checkpoint path")->capture_default_str();
    cmd->add_option("--report", contrast.report, "also write the metric report to this file");
    cmd->add_option("--lr", contrast.train.lr, "learning rate")->capture_default_str();
    cmd->add_option("--epochs", contrast.train.epochs, "training epochs")
        ->capture_default_str();
    cmd->add_option("--batch", contrast.train.batch_size, "triplets per batch")
        ->capture_default_str();
    cmd->add_option("--seed", contrast.train.seed, "master seed")->capture_default_str();
    cmd->add_option("--val-fraction", contrast.val_fraction, "validation image fraction")
        ->capture_default_str();
    cmd->add_option("--test-fraction", contrast.test_fraction, "held-out image fraction")
        ->capture_default_str();
    add_common_flags(cmd, contrast.common);
    cmd->callback([&] { action = [&] { run_train_contrast(contrast); }; });
  }

  TrainOpts train;
  {
    CLI::App* cmd = app.add_subcommand("train", "train the relation model");
    cmd->add_option("--data", train.data, "dataset file or directory")->required();
    cmd->add_option("--out", train.out, "checkpoint path")->capture_default_str();
    cmd->add_option("--scene-ckpt", train.scene_ckpt,
                    "scene encoder checkpoint from train-contrast");
    cmd->add_option("--report", train.report, "also write the metric report to this file");
    cmd->add_option("--lr", train.train.lr, "learning rate")->capture_default_str();
    cmd->add_option("--epochs", train.train.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--batch", train.train.batch_size, "images per batch")
        ->capture_default_str();
    cmd->add_option("--rgcn-depth", train.train.rgcn_depth, "graph update steps T")
        ->capture_default_str();
    cmd->add_option("--hidden", train.train.hidden_dim, "classifier hidden width")
        ->capture_default_str();
    cmd->add_option("--seed", train.train.seed, "master seed")->capture_default_str();
    cmd->add_option("--val-fraction", train.val_fraction, "validation image fraction")
        ->capture_default_str();
    cmd->add_option("--test-fraction", train.test_fraction, "held-out image fraction")
        ->capture_default_str();
    cmd->add_option("--scene-mode", train.scene_mode,
                    "scene encoder source: auto, contrast or raw")
        ->capture_default_str();
    cmd->add_flag("--finetune-scene-encoder", train.train.finetune_scene_encoder,
                  "update the scene encoder during training (frozen by default)");
    cmd->add_option("--class-weights", train.class_weights,
                    "comma-separated per-class loss weights")
        ->delimiter(',');
    add_mask_flags(cmd, train.mask);
    add_common_flags(cmd, train.common);
    cmd->callback([&] { action = [&] { run_train(train); }; });
  }

  EvalOpts eval;
  {
    CLI::App* cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    cmd->add_option("--ckpt", eval.ckpt, "model checkpoint from train");
    cmd->add_option("--data", eval.data, "dataset file or directory");
    cmd->add_option("--out", eval.out, "metric report file")->capture_default_str();
    add_common_flags(cmd, eval.common);
    cmd->callback([&] { action = [&] { run_eval(eval); }; });
  }

  AblateOpts ablate;
  {
    CLI::App* cmd = app.add_subcommand("ablate", "train all stream-ablation variants");
    cmd->add_option("--data", ablate.data, "dataset file or directory")->required();
    cmd->add_option("--out", ablate.out, "table file; a .json twin is written next to it")
        ->capture_default_str();
    cmd->add_option("--scene-ckpt", ablate.scene_ckpt,
                    "scene encoder checkpoint from train-contrast");
    cmd->add_option("--scene-mode", ablate.scene_mode,
                    "scene encoder source: auto, contrast or raw")
        ->capture_default_str();
    cmd->add_option("--reps", ablate.repetitions, "repetitions per variant")
        ->capture_default_str();
    cmd->add_option("--lr", ablate.train.lr, "learning rate")->capture_default_str();
    cmd->add_option("--epochs", ablate.train.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--batch", ablate.train.batch_size, "images per batch")
        ->capture_default_str();
    cmd->add_option("--rgcn-depth", ablate.train.rgcn_depth, "graph update steps T")
        ->capture_default_str();
    cmd->add_option("--hidden", ablate.train.hidden_dim, "classifier hidden width")
        ->capture_default_str();
    cmd->add_option("--seed", ablate.train.seed, "master seed")->capture_default_str();
    cmd->add_option("--val-fraction", ablate.val_fraction, "validation image fraction")
        ->capture_default_str();
    add_common_flags(cmd, ablate.common);
    cmd->callback([&] { action = [&] { run_ablate(ablate); }; });
  }

  InferOpts infer;
  {
    CLI::App* cmd = app.add_subcommand("infer", "write per-pair class probabilities");
    cmd->add_option("--ckpt", infer.ckpt, "model checkpoint from train");
    cmd->add_option("--data", infer.data, "dataset file or directory");
    cmd->add_option("--out", infer.out, "predictions file")->capture_default_str();
    add_common_flags(cmd, infer.common);
    cmd->callback([&] { action = [&] { run_infer(infer); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    action();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
