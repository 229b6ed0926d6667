#include "prise/relation_head.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "prise/metrics.hpp"

namespace prise {

namespace {

Tensor concat_tensors(const std::vector<const Tensor*>& blocks) {
  std::int64_t total = 0;
  for (const Tensor* b : blocks) total += b->size();
  Tensor out = Tensor::zeros({total});
  double* d = out.mutable_data();
  for (const Tensor* b : blocks) {
    std::memcpy(d, b->data(), static_cast<std::size_t>(b->size()) * sizeof(double));
    d += b->size();
  }
  return out;
}

void check_pair_inputs(const ImageRecord& record, std::int64_t n_edges) {
  const std::int64_t n_pairs = pair_count(record.n_persons);
  if (n_edges != n_pairs)
    throw DataError("image " + record.image_id + " supplies " + std::to_string(n_edges) +
                    " fused edges for " + std::to_string(n_pairs) + " pairs");
  if (static_cast<std::int64_t>(record.union_features.size()) != n_pairs) {
    const auto pairs = all_pairs(record.n_persons);
    const std::size_t first_missing = record.union_features.size();
    std::string pair_name = first_missing < pairs.size()
                                ? "(" + std::to_string(pairs[first_missing].first) + ", " +
                                      std::to_string(pairs[first_missing].second) + ")"
                                : "(?)";
    throw DataError("image " + record.image_id + " is missing the union feature for pair " +
                    pair_name);
  }
}

double weight_for(std::int64_t label, const std::optional<std::vector<double>>& class_weights,
                  std::int64_t n_classes) {
  if (!class_weights) return 1.0;
  if (static_cast<std::int64_t>(class_weights->size()) != n_classes)
    throw ShapeError("classification_loss: " + std::to_string(class_weights->size()) +
                     " class weights for " + std::to_string(n_classes) + " classes");
  const double w = (*class_weights)[static_cast<std::size_t>(label)];
  if (!(w >= 0.0)) throw DataError("classification_loss: negative weight for class " +
                                   std::to_string(label));
  return w;
}

}  // namespace

std::int64_t fused_dim(const StreamMask& mask, std::int64_t feature_dim, bool zero_fill) {
  if (mask.enabled_count() == 0) throw Error("at least one feature stream must stay enabled");
  return (zero_fill ? 4 : mask.enabled_count()) * feature_dim;
}

MlpParams init_mlp_params(std::int64_t input_dim, std::int64_t hidden_dim,
                          std::int64_t n_classes, std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || n_classes < 2)
    throw Error("init_mlp_params: need input_dim >= 1, hidden_dim >= 1, n_classes >= 2");
  auto uniform_matrix = [](std::int64_t rows, std::int64_t cols, std::uint64_t s) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Rng rng(s);
    Tensor t = Tensor::zeros({rows, cols});
    double* d = t.mutable_data();
    for (std::int64_t i = 0; i < t.size(); ++i) d[i] = rng.uniform(-bound, bound);
    return t;
  };
  MlpParams params;
  params.w1 = uniform_matrix(hidden_dim, input_dim, derive_seed(seed, "mlp.w1"));
  params.b1 = Tensor::zeros({hidden_dim});
  params.w2 = uniform_matrix(n_classes, hidden_dim, derive_seed(seed, "mlp.w2"));
  params.b2 = Tensor::zeros({n_classes});
  return params;
}

MlpParamValues lift_params(Tape& tape, const MlpParams& params, bool trainable) {
  auto lift = [&](const Tensor& t) { return trainable ? tape.parameter(t) : tape.constant(t); };
  return MlpParamValues{lift(params.w1), lift(params.b1), lift(params.w2), lift(params.b2)};
}

std::vector<PairFeature> assemble_pair_features(const GraphState& state,
                                                const ImageRecord& record,
                                                const Tensor& scene_feature,
                                                const StreamMask& mask, bool zero_fill) {
  if (mask.enabled_count() == 0) throw Error("at least one feature stream must stay enabled");
  check_pair_inputs(record, static_cast<std::int64_t>(state.fused_edges.size()));
  const std::int64_t f = record.background_feature.size();
  const Tensor zero_block = Tensor::zeros({f});
  std::vector<PairFeature> features;
  const auto pairs = all_pairs(record.n_persons);
  features.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    std::vector<const Tensor*> blocks;
    auto push = [&](bool enabled, const Tensor& t) {
      if (enabled)
        blocks.push_back(&t);
      else if (zero_fill)
        blocks.push_back(&zero_block);
    };
    push(mask.interactive, state.fused_edges[p]);
    push(mask.foreground, record.union_features[p]);
    push(mask.background, record.background_feature);
    push(mask.scene, scene_feature);
    features.push_back(PairFeature{pairs[p], concat_tensors(blocks)});
  }
  return features;
}

std::vector<PairFeatureValue> assemble_pair_features(Tape& tape, const GraphStateValues& state,
                                                     const ImageRecord& record,
                                                     Value scene_feature, const StreamMask& mask,
                                                     bool zero_fill) {
  if (mask.enabled_count() == 0) throw Error("at least one feature stream must stay enabled");
  check_pair_inputs(record, static_cast<std::int64_t>(state.fused_edges.size()));
  const std::int64_t f = record.background_feature.size();
  const Value zero_block = tape.constant(Tensor::zeros({f}));
  const Value background = tape.constant(record.background_feature);
  std::vector<PairFeatureValue> features;
  const auto pairs = all_pairs(record.n_persons);
  features.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Value union_feature = tape.constant(record.union_features[p]);
    std::vector<Value> blocks;
    auto push = [&](bool enabled, Value v) {
      if (enabled)
        blocks.push_back(v);
      else if (zero_fill)
        blocks.push_back(zero_block);
    };
    push(mask.interactive, state.fused_edges[p]);
    push(mask.foreground, union_feature);
    push(mask.background, background);
    push(mask.scene, scene_feature);
    features.push_back(PairFeatureValue{pairs[p], concat(blocks)});
  }
  return features;
}

MlpOutput mlp_forward(const PairFeature& feature, const MlpParams& params) {
  if (feature.fused.size() != params.input_dim())
    throw ShapeError("mlp_forward: fused vector has dimension " +
                     std::to_string(feature.fused.size()) + ", layer expects " +
                     std::to_string(params.input_dim()));
  const Tensor hidden = relu(add(matmul(params.w1, feature.fused), params.b1));
  const Tensor logits = add(matmul(params.w2, hidden), params.b2);
  MlpOutput out;
  out.logits = logits;
  out.probabilities = Tensor::from_vector(softmax(logits.to_vector()));
  return out;
}

Value mlp_logits(Value fused, const MlpParamValues& params) {
  const Value hidden = relu(affine(params.w1, fused, params.b1));
  return affine(params.w2, hidden, params.b2);
}

const Tensor& RelationPrediction::probabilities_for(std::int64_t i, std::int64_t j) const {
  const auto key = std::minmax(i, j);
  for (std::size_t p = 0; p < pairs.size(); ++p)
    if (pairs[p].first == key.first && pairs[p].second == key.second) return probabilities[p];
  throw Error("no prediction for pair (" + std::to_string(i) + ", " + std::to_string(j) +
              ") in image " + image_id);
}

RelationPrediction predict_image(const ImageRecord& record, const PriseModel& model) {
  RelationPrediction prediction;
  prediction.image_id = record.image_id;
  if (record.n_persons < 2) {
    prediction.warning = "image " + record.image_id + " has a single person; nothing to predict";
    return prediction;
  }
  const GraphState state = rgcn_forward(build_graph(record), model.rgcn);
  const std::int64_t f = record.background_feature.size();
  const Tensor scene_feature = model.mask.scene
                                   ? extract_scene_feature(record, model.scene_encoder)
                                   : Tensor::zeros({f});
  const auto features =
      assemble_pair_features(state, record, scene_feature, model.mask, model.zero_fill);
  for (const PairFeature& feature : features) {
    const MlpOutput out = mlp_forward(feature, model.mlp);
    prediction.pairs.push_back(feature.pair);
    prediction.argmax.push_back(argmax_class(out.probabilities.to_vector()));
    prediction.probabilities.push_back(out.probabilities);
  }
  return prediction;
}

std::vector<std::string> format_prediction_lines(const RelationPrediction& prediction) {
  std::vector<std::string> lines;
  lines.reserve(prediction.pairs.size());
  for (std::size_t p = 0; p < prediction.pairs.size(); ++p) {
    std::string line = prediction.image_id + " " + std::to_string(prediction.pairs[p].first) +
                       " " + std::to_string(prediction.pairs[p].second);
    const Tensor& probs = prediction.probabilities[p];
    for (std::int64_t c = 0; c < probs.size(); ++c) line += " " + format_double(probs[c]);
    line += " " + std::to_string(prediction.argmax[p]);
    lines.push_back(std::move(line));
  }
  return lines;
}

ClassificationLossResult classification_loss(
    const RelationPrediction& prediction,
    const std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t>& labels,
    const std::optional<std::vector<double>>& class_weights, bool strict) {
  ClassificationLossResult result;
  double weighted_sum = 0.0;
  double weight_sum = 0.0;
  for (std::size_t p = 0; p < prediction.pairs.size(); ++p) {
    const auto it = labels.find(prediction.pairs[p]);
    if (it == labels.end()) {
      if (strict)
        throw DataError("pair (" + std::to_string(prediction.pairs[p].first) + ", " +
                        std::to_string(prediction.pairs[p].second) + ") of image " +
                        prediction.image_id + " has no label");
      result.skipped_pairs += 1;
      continue;
    }
    const Tensor& probs = prediction.probabilities[p];
    const std::int64_t label = it->second;
    if (label < 0 || label >= probs.size())
      throw DataError("label " + std::to_string(label) + " out of range for pair (" +
                      std::to_string(prediction.pairs[p].first) + ", " +
                      std::to_string(prediction.pairs[p].second) + ")");
    const double w = weight_for(label, class_weights, probs.size());
    // materialized probabilities can underflow to 0; clamp keeps the log finite
    const double pr = std::max(probs[label], 1e-12);
    weighted_sum += w * (-std::log(pr));
    weight_sum += w;
    result.counted_pairs += 1;
  }
  for (const auto& [pair, label] : labels) {
    (void)label;
    bool found = false;
    for (const auto& predicted : prediction.pairs)
      if (predicted == pair) found = true;
    if (!found)
      throw DataError("label for pair (" + std::to_string(pair.first) + ", " +
                      std::to_string(pair.second) + ") of image " + prediction.image_id +
                      " has no prediction");
  }
  if (result.counted_pairs == 0)
    throw DataError("classification_loss: no labeled pairs in image " + prediction.image_id);
  if (weight_sum <= 0.0)
    throw DataError("classification_loss: class weights sum to zero over the labeled pairs");
  result.loss = weighted_sum / weight_sum;
  result.weight_sum = weight_sum;
  return result;
}

TapeLossResult classification_loss(
    Tape& tape, const std::vector<PairFeatureValue>& features, const std::vector<Value>& logits,
    const std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t>& labels,
    const std::optional<std::vector<double>>& class_weights, bool strict) {
  if (features.size() != logits.size())
    throw ShapeError("classification_loss: " + std::to_string(features.size()) +
                     " features but " + std::to_string(logits.size()) + " logit vectors");
  TapeLossResult result;
  std::vector<Value> terms;
  double weight_sum = 0.0;
  for (std::size_t p = 0; p < features.size(); ++p) {
    if (logits[p].tape != &tape)
      throw Error("classification_loss: logits recorded on a different tape");
    const auto it = labels.find(features[p].pair);
    if (it == labels.end()) {
      if (strict)
        throw DataError("pair (" + std::to_string(features[p].pair.first) + ", " +
                        std::to_string(features[p].pair.second) + ") has no label");
      result.skipped_pairs += 1;
      continue;
    }
    const std::int64_t label = it->second;
    const std::int64_t n_classes = logits[p].value().size();
    if (label < 0 || label >= n_classes)
      throw DataError("label " + std::to_string(label) + " out of range for pair (" +
                      std::to_string(features[p].pair.first) + ", " +
                      std::to_string(features[p].pair.second) + ")");
    const double w = weight_for(label, class_weights, n_classes);
    // log-softmax never materializes the probability, so no clamp is needed
    Value nll = scale(select(log_softmax(logits[p]), label), -1.0);
    terms.push_back(class_weights ? scale(nll, w) : nll);
    weight_sum += w;
    result.counted_pairs += 1;
  }
  if (result.counted_pairs == 0) throw DataError("classification_loss: no labeled pairs");
  if (weight_sum <= 0.0)
    throw DataError("classification_loss: class weights sum to zero over the labeled pairs");
  result.loss = scale(sum(concat(terms)), 1.0 / weight_sum);
  result.weight_sum = weight_sum;
  return result;
}

}  // namespace prise
