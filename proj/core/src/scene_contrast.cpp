#include "prise/scene_contrast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "prise/adam.hpp"
#include "prise/checkpoint.hpp"
#include "prise/metrics.hpp"

namespace prise {

namespace {
constexpr double kScoreClamp = 1e-12;
}

SceneEncoder init_identity_encoder(std::int64_t feature_dim) {
  if (feature_dim < 1) throw Error("init_identity_encoder: feature_dim must be positive");
  return SceneEncoder{Tensor::identity(feature_dim), Tensor::zeros({feature_dim})};
}

BilinearScorer init_scorer(std::int64_t feature_dim, std::uint64_t seed) {
  if (feature_dim < 1) throw Error("init_scorer: feature_dim must be positive");
  const double bound = std::sqrt(6.0 / (2.0 * static_cast<double>(feature_dim)));
  Rng rng(derive_seed(seed, "scorer.w"));
  Tensor w = Tensor::zeros({feature_dim, feature_dim});
  double* d = w.mutable_data();
  for (std::int64_t i = 0; i < w.size(); ++i) d[i] = rng.uniform(-bound, bound);
  return BilinearScorer{w};
}

bool scenes_similar(const std::vector<std::int64_t>& top5_a,
                    const std::vector<std::int64_t>& top5_b, std::int64_t k, bool strict) {
  std::int64_t overlap = 0;
  for (const std::int64_t a : top5_a)
    if (std::find(top5_b.begin(), top5_b.end(), a) != top5_b.end()) ++overlap;
  return strict ? overlap > k : overlap >= k;
}

ContrastPools build_pools(const std::vector<ImageRecord>& records, const PoolConfig& config) {
  if (config.overlap_k < 0 || config.overlap_k > 4)
    throw Error("build_pools: overlap threshold must lie in 0..4, got " +
                std::to_string(config.overlap_k));
  if (config.cap < 1) throw Error("build_pools: cap must be positive");
  for (const ImageRecord& r : records) {
    if (r.pseudo_top5.size() != 5)
      throw DataError("build_pools: image " + r.image_id + " has " +
                      std::to_string(r.pseudo_top5.size()) + " pseudo scene labels, expected 5");
    std::set<std::int64_t> uniq(r.pseudo_top5.begin(), r.pseudo_top5.end());
    if (uniq.size() != 5)
      throw DataError("build_pools: image " + r.image_id + " has duplicate pseudo scene labels");
  }

  const std::int64_t n = static_cast<std::int64_t>(records.size());
  ContrastPools pools;
  pools.config = config;
  for (const ImageRecord& r : records) {
    pools.index_of[r.image_id] = static_cast<std::int64_t>(pools.image_ids.size());
    pools.image_ids.push_back(r.image_id);
  }
  if (static_cast<std::int64_t>(pools.index_of.size()) != n)
    throw DataError("build_pools: duplicate image ids in the record set");

  pools.similar.resize(static_cast<std::size_t>(n));
  pools.dissimilar.resize(static_cast<std::size_t>(n));
  for (std::int64_t a = 0; a < n; ++a) {
    for (std::int64_t b = a + 1; b < n; ++b) {
      const bool sim = scenes_similar(records[static_cast<std::size_t>(a)].pseudo_top5,
                                      records[static_cast<std::size_t>(b)].pseudo_top5,
                                      config.overlap_k, config.strict);
      auto& a_pool = sim ? pools.similar : pools.dissimilar;
      a_pool[static_cast<std::size_t>(a)].push_back(b);
      a_pool[static_cast<std::size_t>(b)].push_back(a);
    }
  }

  auto truncate = [&](std::vector<std::int64_t>& pool, std::uint64_t seed) {
    if (static_cast<std::int64_t>(pool.size()) <= config.cap) return;
    Rng rng(seed);
    const auto picks =
        rng.sample_without_replacement(static_cast<std::int64_t>(pool.size()), config.cap);
    std::vector<std::int64_t> kept;
    kept.reserve(picks.size());
    for (const std::int64_t p : picks) kept.push_back(pool[static_cast<std::size_t>(p)]);
    std::sort(kept.begin(), kept.end());
    pool = std::move(kept);
  };
  for (std::int64_t a = 0; a < n; ++a) {
    truncate(pools.similar[static_cast<std::size_t>(a)],
             derive_seed(config.seed, "pools.similar", a));
    truncate(pools.dissimilar[static_cast<std::size_t>(a)],
             derive_seed(config.seed, "pools.dissimilar", a));
  }
  return pools;
}

void save_pools(const ContrastPools& pools, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write pool file " + path);
  for (std::size_t a = 0; a < pools.image_ids.size(); ++a) {
    out << pools.image_ids[a] << "\tsim:";
    for (std::size_t k = 0; k < pools.similar[a].size(); ++k) {
      if (k) out << ",";
      out << pools.image_ids[static_cast<std::size_t>(pools.similar[a][k])];
    }
    out << "\tdis:";
    for (std::size_t k = 0; k < pools.dissimilar[a].size(); ++k) {
      if (k) out << ",";
      out << pools.image_ids[static_cast<std::size_t>(pools.dissimilar[a][k])];
    }
    out << "\n";
  }
  if (!out) throw DataError("write failed for pool file " + path);
}

ContrastPools load_pools(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pool file " + path);
  struct Row {
    std::string id;
    std::vector<std::string> sim, dis;
  };
  std::vector<Row> rows;
  std::string line;
  std::int64_t line_no = 0;
  auto split_ids = [](const std::string& s) {
    std::vector<std::string> ids;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) ids.push_back(item);
    return ids;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    Row row;
    std::string sim_field, dis_field;
    if (!std::getline(ss, row.id, '\t') || !std::getline(ss, sim_field, '\t') ||
        !std::getline(ss, dis_field))
      throw DataError(path + ":" + std::to_string(line_no) + ": expected three tab fields");
    if (sim_field.rfind("sim:", 0) != 0 || dis_field.rfind("dis:", 0) != 0)
      throw DataError(path + ":" + std::to_string(line_no) + ": missing sim:/dis: prefixes");
    row.sim = split_ids(sim_field.substr(4));
    row.dis = split_ids(dis_field.substr(4));
    rows.push_back(std::move(row));
  }
  ContrastPools pools;
  for (const Row& row : rows) {
    if (pools.index_of.count(row.id))
      throw DataError(path + ": duplicate image id " + row.id);
    pools.index_of[row.id] = static_cast<std::int64_t>(pools.image_ids.size());
    pools.image_ids.push_back(row.id);
  }
  auto lookup = [&](const std::string& id) {
    const auto it = pools.index_of.find(id);
    if (it == pools.index_of.end()) throw DataError(path + ": unknown image id " + id);
    return it->second;
  };
  for (const Row& row : rows) {
    std::vector<std::int64_t> sim, dis;
    for (const std::string& id : row.sim) sim.push_back(lookup(id));
    for (const std::string& id : row.dis) dis.push_back(lookup(id));
    pools.similar.push_back(std::move(sim));
    pools.dissimilar.push_back(std::move(dis));
  }
  return pools;
}

std::optional<Triplet> sample_triplet(const ContrastPools& pools, std::int64_t anchor, Rng& rng) {
  const std::size_t a = static_cast<std::size_t>(anchor);
  if (a >= pools.image_ids.size()) throw Error("sample_triplet: anchor index out of range");
  const auto& sim = pools.similar[a];
  const auto& dis = pools.dissimilar[a];
  if (sim.empty() || dis.empty()) return std::nullopt;
  Triplet t;
  t.anchor = anchor;
  t.positive = sim[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(sim.size()) - 1))];
  t.negative = dis[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(dis.size()) - 1))];
  return t;
}

double bilinear_score(const Tensor& x, const Tensor& y, const BilinearScorer& scorer) {
  const Tensor wy = matmul(scorer.w, y);
  if (x.size() != wy.size())
    throw ShapeError("bilinear_score: x has dimension " + std::to_string(x.size()) +
                     ", W y has " + std::to_string(wy.size()));
  double acc = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i] * wy[i];
  return 1.0 / (1.0 + std::exp(-acc));
}

Value bilinear_score(Value x, Value y, Value w) { return sigmoid(dot(x, matmul(w, y))); }

ContrastiveLossTerms contrastive_loss(Tape& tape,
                                      const std::vector<std::pair<Value, Value>>& scores) {
  if (scores.empty()) throw ShapeError("contrastive_loss: empty batch");
  ContrastiveLossTerms out{Value{}, 0};
  std::vector<Value> terms;
  terms.reserve(scores.size());
  for (const auto& [s_pos, s_neg] : scores) {
    if (s_pos.tape != &tape || s_neg.tape != &tape)
      throw Error("contrastive_loss: score recorded on a different tape");
    const double sp = s_pos.value().item();
    const double sn = s_neg.value().item();
    if (sp < kScoreClamp || sp > 1.0 - kScoreClamp) out.clamped += 1;
    if (sn < kScoreClamp || sn > 1.0 - kScoreClamp) out.clamped += 1;
    Value pos_term = log(clamp(s_pos, kScoreClamp, 1.0 - kScoreClamp));
    Value one_minus_neg = add_scalar(scale(s_neg, -1.0), 1.0);
    Value neg_term = log(clamp(one_minus_neg, kScoreClamp, 1.0 - kScoreClamp));
    terms.push_back(scale(add(pos_term, neg_term), -1.0));
  }
  out.loss = mean(concat(terms));
  return out;
}

double contrastive_loss_value(const std::vector<std::pair<double, double>>& scores) {
  Tape tape;
  std::vector<std::pair<Value, Value>> values;
  values.reserve(scores.size());
  for (const auto& [sp, sn] : scores)
    values.emplace_back(tape.constant(Tensor::scalar(sp)), tape.constant(Tensor::scalar(sn)));
  return contrastive_loss(tape, values).loss.value().item();
}

Tensor extract_scene_feature(const ImageRecord& record, const SceneEncoder& encoder) {
  if (record.raw_scene_input.size() == 1 && record.raw_scene_input.rank() == 0)
    throw DataError("extract_scene_feature: image " + record.image_id +
                    " is missing its raw scene input");
  return relu(add(matmul(encoder.weight, record.raw_scene_input), encoder.bias));
}

Value extract_scene_feature(Value raw_scene_input, Value weight, Value bias) {
  return relu(add(matmul(weight, raw_scene_input), bias));
}

namespace {

struct TapeModel {
  Value weight, bias, w;
};

void triplet_scores(Tape& tape, const TapeModel& m, const Tensor& raw_a, const Tensor& raw_p,
                    const Tensor& raw_n, std::vector<std::pair<Value, Value>>& out) {
  Value xa = extract_scene_feature(tape.constant(raw_a), m.weight, m.bias);
  Value xp = extract_scene_feature(tape.constant(raw_p), m.weight, m.bias);
  Value xn = extract_scene_feature(tape.constant(raw_n), m.weight, m.bias);
  out.emplace_back(bilinear_score(xa, xp, m.w), bilinear_score(xa, xn, m.w));
}

std::vector<Triplet> fixed_triplets(const ContrastPools& pools,
                                    const std::vector<std::int64_t>& anchors, std::uint64_t seed,
                                    std::int64_t* skipped) {
  Rng rng(seed);
  std::vector<Triplet> out;
  for (const std::int64_t a : anchors) {
    const auto t = sample_triplet(pools, a, rng);
    if (t)
      out.push_back(*t);
    else if (skipped)
      *skipped += 1;
  }
  return out;
}

ContrastEval score_triplets(const Dataset& data, const std::vector<Triplet>& triplets,
                            const SceneEncoder& encoder, const BilinearScorer& scorer,
                            std::int64_t skipped) {
  ContrastEval eval;
  eval.skipped = skipped;
  eval.triplets = static_cast<std::int64_t>(triplets.size());
  if (triplets.empty()) return eval;
  std::vector<double> scores;
  std::vector<bool> labels;
  std::int64_t correct = 0;
  for (const Triplet& t : triplets) {
    const Tensor xa = extract_scene_feature(
        data.records[static_cast<std::size_t>(t.anchor)], encoder);
    const Tensor xp = extract_scene_feature(
        data.records[static_cast<std::size_t>(t.positive)], encoder);
    const Tensor xn = extract_scene_feature(
        data.records[static_cast<std::size_t>(t.negative)], encoder);
    const double s_pos = bilinear_score(xa, xp, scorer);
    const double s_neg = bilinear_score(xa, xn, scorer);
    scores.push_back(s_pos);
    labels.push_back(true);
    scores.push_back(s_neg);
    labels.push_back(false);
    if (s_pos > 0.5) ++correct;
    if (s_neg <= 0.5) ++correct;
  }
  eval.accuracy = static_cast<double>(correct) / (2.0 * static_cast<double>(triplets.size()));
  eval.auc = auc(scores, labels);
  return eval;
}

}  // namespace

ContrastEval evaluate_contrast(const Dataset& data, const ContrastPools& pools,
                               const std::vector<std::int64_t>& anchor_indices,
                               const SceneEncoder& encoder, const BilinearScorer& scorer,
                               std::uint64_t seed) {
  std::int64_t skipped = 0;
  const auto triplets = fixed_triplets(pools, anchor_indices, seed, &skipped);
  return score_triplets(data, triplets, encoder, scorer, skipped);
}

ContrastTrainResult train_contrast(const Dataset& data, const ContrastPools& pools,
                                   const std::vector<std::int64_t>& train_indices,
                                   const std::vector<std::int64_t>& val_indices,
                                   const ContrastConfig& config) {
  if (data.records.empty()) throw DataError("train_contrast: empty dataset");
  if (pools.image_ids.size() != data.records.size())
    throw DataError("train_contrast: pools cover " + std::to_string(pools.image_ids.size()) +
                    " images, dataset has " + std::to_string(data.records.size()));
  if (config.epochs < 1) throw Error("train_contrast: epochs must be at least 1");
  if (config.batch_size < 1) throw Error("train_contrast: batch_size must be at least 1");
  const std::int64_t f = data.feature_dim;

  ContrastTrainResult result;
  result.encoder = init_identity_encoder(f);
  result.scorer = init_scorer(f, derive_seed(config.seed, "contrast.init"));
  SceneEncoder enc = result.encoder;
  BilinearScorer scorer = result.scorer;

  Adam opt(AdamConfig{.lr = config.lr, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8});
  const auto slot_weight = opt.add_slot(enc.weight.shape(), "scene_encoder.weight");
  const auto slot_bias = opt.add_slot(enc.bias.shape(), "scene_encoder.bias");
  const auto slot_w = opt.add_slot(scorer.w.shape(), "scorer.w");

  std::int64_t val_skipped = 0;
  const std::vector<Triplet> val_triplets =
      fixed_triplets(pools, val_indices, derive_seed(config.seed, "contrast.val"), &val_skipped);

  auto save = [&](std::int64_t epoch, double val_auc) {
    if (config.checkpoint_path.empty()) return;
    Checkpoint ckpt;
    nlohmann::json meta;
    meta["kind"] = "contrast";
    meta["f"] = f;
    meta["epoch"] = epoch;
    meta["val_auc"] = val_auc;
    ckpt.meta_json = meta.dump();
    ckpt.tensors = {{"scene_encoder.weight", enc.weight},
                    {"scene_encoder.bias", enc.bias},
                    {"scorer.w", scorer.w}};
    save_checkpoint(ckpt, config.checkpoint_path);
  };

  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "contrast.epoch", epoch));
    std::vector<std::int64_t> anchors = train_indices;
    rng.shuffle(anchors);

    std::vector<Triplet> triplets;
    std::int64_t skipped = 0;
    for (const std::int64_t a : anchors) {
      const auto t = sample_triplet(pools, a, rng);
      if (t) {
        triplets.push_back(*t);
      } else {
        skipped += 1;
        result.skipped_anchor_ids.insert(pools.image_ids[static_cast<std::size_t>(a)]);
      }
    }
    if (triplets.empty())
      throw DataError("train_contrast: every training anchor has an empty pool");

    double loss_sum = 0.0;
    std::int64_t clamped = 0;
    std::size_t cursor = 0;
    while (cursor < triplets.size()) {
      const std::size_t end =
          std::min(cursor + static_cast<std::size_t>(config.batch_size), triplets.size());
      Tape tape;
      TapeModel model{tape.parameter(enc.weight), tape.parameter(enc.bias),
                      tape.parameter(scorer.w)};
      std::vector<std::pair<Value, Value>> scores;
      for (std::size_t k = cursor; k < end; ++k) {
        const Triplet& t = triplets[k];
        triplet_scores(tape, model,
                       data.records[static_cast<std::size_t>(t.anchor)].raw_scene_input,
                       data.records[static_cast<std::size_t>(t.positive)].raw_scene_input,
                       data.records[static_cast<std::size_t>(t.negative)].raw_scene_input,
                       scores);
      }
      const ContrastiveLossTerms terms = contrastive_loss(tape, scores);
      const double batch_loss = terms.loss.value().item();
      if (!std::isfinite(batch_loss))
        throw NumericError("train_contrast: non-finite loss at epoch " + std::to_string(epoch) +
                           "; last-good checkpoint retained");
      clamped += terms.clamped;
      loss_sum += batch_loss * static_cast<double>(end - cursor);
      tape.backward(terms.loss);
      opt.step(slot_weight, enc.weight, tape.gradient(model.weight));
      opt.step(slot_bias, enc.bias, tape.gradient(model.bias));
      opt.step(slot_w, scorer.w, tape.gradient(model.w));
      cursor = end;
    }

    const ContrastEval val = score_triplets(data, val_triplets, enc, scorer, val_skipped);
    ContrastEpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(triplets.size());
    stats.val_accuracy = val.accuracy;
    stats.val_auc = val.auc;
    stats.skipped_anchors = skipped;
    stats.clamped_scores = clamped;
    result.history.push_back(stats);

    if (val.auc > result.best_val_auc || result.best_epoch < 0) {
      result.best_val_auc = val.auc;
      result.best_epoch = epoch;
      result.encoder = enc;
      result.scorer = scorer;
      save(epoch, val.auc);
    }
  }
  return result;
}

}  // namespace prise
