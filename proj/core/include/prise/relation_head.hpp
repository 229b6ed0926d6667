#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prise/autograd.hpp"
#include "prise/dataset.hpp"
#include "prise/rgcn.hpp"
#include "prise/scene_contrast.hpp"
#include "prise/tensor.hpp"

namespace prise {

/// Which of the four per-pair feature streams participate in the fused
/// vector. Disabling a stream removes its block (the fused vector
/// shrinks) unless zero_fill keeps the block as zeros.
struct StreamMask {
  bool interactive = true;  // r_ij, the fused graph edge
  bool scene = true;        // x'_I, the encoded scene feature
  bool foreground = true;   // x_ij, the union-region feature
  bool background = true;   // x_I, the whole-image feature

  std::int64_t enabled_count() const {
    return static_cast<std::int64_t>(interactive) + static_cast<std::int64_t>(scene) +
           static_cast<std::int64_t>(foreground) + static_cast<std::int64_t>(background);
  }
};

/// Dimension of the fused pair vector under a mask: blocks are F wide,
/// removal shrinks the vector, zero filling keeps all four blocks.
std::int64_t fused_dim(const StreamMask& mask, std::int64_t feature_dim, bool zero_fill);

struct PairFeature {
  std::pair<std::int64_t, std::int64_t> pair;  // i < j
  Tensor fused;
};

struct PairFeatureValue {
  std::pair<std::int64_t, std::int64_t> pair;
  Value fused;
};

/// One hidden ReLU layer followed by a linear map to class logits.
struct MlpParams {
  Tensor w1;  // F_h x D
  Tensor b1;  // F_h
  Tensor w2;  // C x F_h
  Tensor b2;  // C

  std::int64_t input_dim() const { return w1.cols(); }
  std::int64_t hidden_dim() const { return w1.rows(); }
  std::int64_t n_classes() const { return w2.rows(); }
};

struct MlpParamValues {
  Value w1, b1, w2, b2;
};

/// Seeded uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
MlpParams init_mlp_params(std::int64_t input_dim, std::int64_t hidden_dim,
                          std::int64_t n_classes, std::uint64_t seed);

MlpParamValues lift_params(Tape& tape, const MlpParams& params, bool trainable);

/// Concatenates r_ij, x_ij, x_I and x'_I per unordered pair, in that
/// order, honoring the mask. The x_I and x'_I blocks are shared across
/// all pairs of the image.
std::vector<PairFeature> assemble_pair_features(const GraphState& state,
                                                const ImageRecord& record,
                                                const Tensor& scene_feature,
                                                const StreamMask& mask = StreamMask{},
                                                bool zero_fill = false);

/// Tape version for training: graph edges and the scene feature stay
/// differentiable, x_ij and x_I enter as constants.
std::vector<PairFeatureValue> assemble_pair_features(Tape& tape, const GraphStateValues& state,
                                                     const ImageRecord& record,
                                                     Value scene_feature,
                                                     const StreamMask& mask = StreamMask{},
                                                     bool zero_fill = false);

struct MlpOutput {
  Tensor logits;
  Tensor probabilities;
};

MlpOutput mlp_forward(const PairFeature& feature, const MlpParams& params);
Value mlp_logits(Value fused, const MlpParamValues& params);

struct RelationPrediction {
  std::string image_id;
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  std::vector<Tensor> probabilities;  // one C-vector per pair
  std::vector<std::int64_t> argmax;   // ties resolve to the lowest class
  std::string warning;                // set for single-person images

  /// Order-free lookup: (i, j) and (j, i) name the same pair.
  const Tensor& probabilities_for(std::int64_t i, std::int64_t j) const;
};

/// Everything needed to score an image end to end.
struct PriseModel {
  RgcnParams rgcn;
  SceneEncoder scene_encoder;
  MlpParams mlp;
  StreamMask mask;
  bool zero_fill = false;
};

/// Graph forward, scene extraction, assembly and MLP for every pair.
/// A single-person image yields an empty prediction with its warning
/// field set.
RelationPrediction predict_image(const ImageRecord& record, const PriseModel& model);

/// `image_id pair_i pair_j p_0 ... p_{C-1} argmax`, one line per pair.
std::vector<std::string> format_prediction_lines(const RelationPrediction& prediction);

struct ClassificationLossResult {
  double loss = 0.0;
  double weight_sum = 0.0;  // denominator, for pooling losses across images
  std::int64_t counted_pairs = 0;
  std::int64_t skipped_pairs = 0;  // unlabeled pairs in lenient mode
};

/// Mean negative log-likelihood of the true class over labeled pairs;
/// with class weights the mean is weighted by the true class's weight.
/// Strict mode rejects any pair missing a label.
ClassificationLossResult classification_loss(
    const RelationPrediction& prediction,
    const std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t>& labels,
    const std::optional<std::vector<double>>& class_weights = std::nullopt, bool strict = true);

/// Tape version over per-pair logits. Returns the loss Value plus the
/// per-pair bookkeeping; unlabeled pairs follow the same strict rule.
struct TapeLossResult {
  Value loss;
  double weight_sum = 0.0;
  std::int64_t counted_pairs = 0;
  std::int64_t skipped_pairs = 0;
};

TapeLossResult classification_loss(
    Tape& tape, const std::vector<PairFeatureValue>& features,
    const std::vector<Value>& logits,
    const std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t>& labels,
    const std::optional<std::vector<double>>& class_weights = std::nullopt, bool strict = true);

}  // namespace prise
