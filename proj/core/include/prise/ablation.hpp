#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prise/trainer.hpp"

namespace prise {

struct AblationConfig {
  TrainConfig base;
  std::int64_t repetitions = 5;
  std::optional<SceneEncoder> scene_encoder;  // required when the base mode is contrast_finetuned
};

struct AblationRow {
  std::string name;
  std::vector<double> accuracies;  // one entry per repetition
  std::vector<double> maps;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_map = 0.0;
  double std_map = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

/// Trains the full model plus the four stream-removal variants plus the
/// never-finetuned-encoder variant, each repeated with independent
/// derived seeds. Rows report best-validation metrics as mean and
/// sample standard deviation. Row order is fixed: PRISE, w/o Int.,
/// w/o Scene, w/o Fore., w/o Back., Pretrained.
AblationTable ablation_run(const Dataset& train_set, const Dataset& val_set,
                           const AblationConfig& config);

/// One tab-separated line per row: name, accuracy mean, accuracy std,
/// mAP mean, mAP std.
std::vector<std::string> format_ablation_table(const AblationTable& table);

std::string ablation_table_json(const AblationTable& table);

}  // namespace prise
