#include "prise/ablation.hpp"

#include <cmath>

#include <json.hpp>

#include "prise/rng.hpp"

namespace prise {

namespace {

struct Variant {
  std::string name;
  std::string seed_tag;
  StreamMask mask;
  SceneEncoderMode mode;
};

std::vector<Variant> variants(const TrainConfig& base) {
  std::vector<Variant> out;
  out.push_back({"PRISE", "full", base.mask, base.scene_encoder_mode});
  Variant v{"w/o Int.", "no_interactive", base.mask, base.scene_encoder_mode};
  v.mask.interactive = false;
  out.push_back(v);
  v = {"w/o Scene", "no_scene", base.mask, base.scene_encoder_mode};
  v.mask.scene = false;
  out.push_back(v);
  v = {"w/o Fore.", "no_foreground", base.mask, base.scene_encoder_mode};
  v.mask.foreground = false;
  out.push_back(v);
  v = {"w/o Back.", "no_background", base.mask, base.scene_encoder_mode};
  v.mask.background = false;
  out.push_back(v);
  out.push_back(
      {"Pretrained", "pretrained", base.mask, SceneEncoderMode::raw_pretrained_analogue});
  return out;
}

void mean_and_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  sd = 0.0;
  if (xs.size() > 1) {
    for (const double x : xs) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(xs.size() - 1));
  }
}

}  // namespace

AblationTable ablation_run(const Dataset& train_set, const Dataset& val_set,
                           const AblationConfig& config) {
  if (config.repetitions < 1)
    throw UsageError("ablation: repetitions must be at least 1");

  AblationTable table;
  for (const Variant& variant : variants(config.base)) {
    AblationRow row;
    row.name = variant.name;
    for (std::int64_t rep = 0; rep < config.repetitions; ++rep) {
      TrainConfig run = config.base;
      run.mask = variant.mask;
      run.scene_encoder_mode = variant.mode;
      run.seed = derive_seed(config.base.seed, "ablation." + variant.seed_tag, rep);
      run.checkpoint_path.clear();
      const bool needs_encoder =
          run.mask.scene && run.scene_encoder_mode == SceneEncoderMode::contrast_finetuned;
      const TrainResult result = train_prise(
          train_set, val_set, run,
          needs_encoder ? config.scene_encoder : std::optional<SceneEncoder>{});
      const EpochStats& best = result.history[static_cast<std::size_t>(result.best_epoch)];
      row.accuracies.push_back(best.val_accuracy);
      row.maps.push_back(best.val_map);
    }
    mean_and_std(row.accuracies, row.mean_accuracy, row.std_accuracy);
    mean_and_std(row.maps, row.mean_map, row.std_map);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<std::string> format_ablation_table(const AblationTable& table) {
  std::vector<std::string> lines;
  lines.push_back("variant\taccuracy_mean\taccuracy_std\tmap_mean\tmap_std");
  for (const AblationRow& row : table.rows)
    lines.push_back(row.name + "\t" + format_double(row.mean_accuracy) + "\t" +
                    format_double(row.std_accuracy) + "\t" + format_double(row.mean_map) + "\t" +
                    format_double(row.std_map));
  return lines;
}

std::string ablation_table_json(const AblationTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const AblationRow& row : table.rows)
    rows.push_back({{"name", row.name},
                    {"accuracies", row.accuracies},
                    {"maps", row.maps},
                    {"mean_accuracy", row.mean_accuracy},
                    {"std_accuracy", row.std_accuracy},
                    {"mean_map", row.mean_map},
                    {"std_map", row.std_map}});
  nlohmann::json j;
  j["rows"] = std::move(rows);
  return j.dump();
}

}  // namespace prise
