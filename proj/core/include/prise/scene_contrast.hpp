#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "prise/autograd.hpp"
#include "prise/dataset.hpp"
#include "prise/rng.hpp"
#include "prise/tensor.hpp"

namespace prise {

/// Scene feature transform: x' = ReLU(weight x + bias). Identity-
/// initialized it passes non-negative inputs through unchanged.
struct SceneEncoder {
  Tensor weight;  // F x F
  Tensor bias;    // F
};

SceneEncoder init_identity_encoder(std::int64_t feature_dim);

struct BilinearScorer {
  Tensor w;  // F x F
};

/// Seeded uniform init in +-sqrt(6 / (2F)).
BilinearScorer init_scorer(std::int64_t feature_dim, std::uint64_t seed);

struct PoolConfig {
  std::int64_t overlap_k = 2;  // valid range 0..4
  bool strict = true;          // similar iff overlap > K; false relaxes to >= K
  std::int64_t cap = 50;
  std::uint64_t seed = 0;
};

struct ContrastPools {
  PoolConfig config;
  std::vector<std::string> image_ids;                 // index -> id
  std::map<std::string, std::int64_t> index_of;       // id -> index
  std::vector<std::vector<std::int64_t>> similar;     // per image, ascending indices
  std::vector<std::vector<std::int64_t>> dissimilar;
};

/// The similarity predicate on two top-5 label sets.
bool scenes_similar(const std::vector<std::int64_t>& top5_a,
                    const std::vector<std::int64_t>& top5_b, std::int64_t k, bool strict);

/// Pairwise pools over all records; each pool truncated to the cap by a
/// seeded uniform draw. Throws DataError naming any image with a
/// malformed top-5 list.
ContrastPools build_pools(const std::vector<ImageRecord>& records, const PoolConfig& config);

/// `image_id<TAB>sim:id,id,...<TAB>dis:id,id,...` per image.
void save_pools(const ContrastPools& pools, const std::string& path);
ContrastPools load_pools(const std::string& path);

struct Triplet {
  std::int64_t anchor = -1;
  std::int64_t positive = -1;
  std::int64_t negative = -1;
};

/// Uniform draw from each of the anchor's pools; nothing when either
/// pool is empty (the caller logs the skip).
std::optional<Triplet> sample_triplet(const ContrastPools& pools, std::int64_t anchor, Rng& rng);

/// sigmoid(x^T W y).
double bilinear_score(const Tensor& x, const Tensor& y, const BilinearScorer& scorer);
Value bilinear_score(Value x, Value y, Value w);

struct ContrastiveLossTerms {
  Value loss;
  std::int64_t clamped = 0;  // scores that hit the log-stability clamp
};

/// Mean over triplets of -log(s_pos) - log(1 - s_neg), scores clamped
/// to [1e-12, 1 - 1e-12] before the logs.
ContrastiveLossTerms contrastive_loss(Tape& tape,
                                      const std::vector<std::pair<Value, Value>>& scores);

/// Same loss on plain numbers (no gradients), for reports and tests.
double contrastive_loss_value(const std::vector<std::pair<double, double>>& scores);

Tensor extract_scene_feature(const ImageRecord& record, const SceneEncoder& encoder);
Value extract_scene_feature(Value raw_scene_input, Value weight, Value bias);

struct ContrastConfig {
  double lr = 1e-5;
  std::int64_t epochs = 20;
  std::int64_t batch_size = 32;
  std::uint64_t seed = 0;
  std::string checkpoint_path;  // empty disables on-disk checkpoints
};

struct ContrastEpochStats {
  std::int64_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_auc = 0.0;
  std::int64_t skipped_anchors = 0;
  std::int64_t clamped_scores = 0;
};

struct ContrastEval {
  double accuracy = 0.0;
  double auc = 0.0;
  std::int64_t triplets = 0;
  std::int64_t skipped = 0;
};

struct ContrastTrainResult {
  SceneEncoder encoder;  // best validation AUC
  BilinearScorer scorer;
  std::vector<ContrastEpochStats> history;
  std::int64_t best_epoch = -1;
  double best_val_auc = 0.0;
  std::set<std::string> skipped_anchor_ids;
};

/// Adam training of encoder + scorer on triplets resampled per epoch
/// from the train anchors; per-epoch evaluation on fixed validation
/// triplets. Saves a checkpoint whenever validation AUC improves; a
/// non-finite loss aborts with NumericError after the last-good
/// checkpoint has been written.
ContrastTrainResult train_contrast(const Dataset& data, const ContrastPools& pools,
                                   const std::vector<std::int64_t>& train_indices,
                                   const std::vector<std::int64_t>& val_indices,
                                   const ContrastConfig& config);

/// Scores fixed seeded triplets for the given anchors: every positive
/// pair labeled 1, negative 0; threshold-0.5 accuracy and AUC.
ContrastEval evaluate_contrast(const Dataset& data, const ContrastPools& pools,
                               const std::vector<std::int64_t>& anchor_indices,
                               const SceneEncoder& encoder, const BilinearScorer& scorer,
                               std::uint64_t seed);

}  // namespace prise
