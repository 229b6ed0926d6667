#include "prise/synth.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "prise/errors.hpp"
#include "prise/rng.hpp"

namespace prise {

namespace {

constexpr std::int64_t kRoles = 4;
constexpr std::int64_t kBackgroundTypes = 2;
constexpr double kPersonNoise = 0.08;      // around the role centroid
constexpr double kPairMeanScale = 0.1;     // faint person-mean term inside x_ij
constexpr double kPairOffsetScale = 0.45;  // flip-delta offset inside x_ij
constexpr double kPairNoise = 0.6;
constexpr double kBackgroundNoise = 0.6;
constexpr double kRawSceneNoise = 0.35;
constexpr double kLabelFlipRate = 0.06;
constexpr double kSignatureScore = 2.2;    // pseudo-label margin over noise
constexpr double kGumbelScale = 0.5;

void check_config(const SynthConfig& c) {
  if (c.n_images < 1) throw UsageError("synthetic config: n_images must be positive");
  if (c.feature_dim < 4) throw UsageError("synthetic config: feature_dim must be at least 4");
  if (c.n_classes < 2) throw UsageError("synthetic config: n_classes must be at least 2");
  if (c.n_scene_types < 2)
    throw UsageError("synthetic config: n_scene_types must be at least 2");
  if (c.min_persons < 1 || c.max_persons < c.min_persons)
    throw UsageError("synthetic config: need 1 <= min_persons <= max_persons");
  if (c.noise < 0.0) throw UsageError("synthetic config: noise must be non-negative");
}

Tensor normal_vector(Rng& rng, std::int64_t f) {
  Tensor t = Tensor::zeros({f});
  for (std::int64_t i = 0; i < f; ++i) t.mutable_data()[i] = rng.normal();
  return t;
}

Tensor noisy(const Tensor& center, Rng& rng, double sigma) {
  Tensor t = center;
  if (sigma > 0.0)
    for (std::int64_t i = 0; i < t.size(); ++i) t.mutable_data()[i] += sigma * rng.normal();
  return t;
}

}  // namespace

SynthResult generate_synthetic(const SynthConfig& config) {
  check_config(config);
  const std::int64_t f = config.feature_dim;

  SynthResult result;
  result.dataset.feature_dim = f;
  result.dataset.n_classes = config.n_classes;
  result.dataset.n_scene_types = config.n_scene_types;
  result.latents.pair_offset_scale = kPairOffsetScale;
  result.latents.pair_mean_scale = kPairMeanScale;

  {
    Rng rng(derive_seed(config.seed, "synth.roles"));
    for (std::int64_t r = 0; r < kRoles; ++r)
      result.latents.role_centroids.push_back(normal_vector(rng, f));
  }
  {
    Rng rng(derive_seed(config.seed, "synth.class_offsets"));
    for (std::int64_t c = 0; c < config.n_classes; ++c)
      result.latents.class_offsets.push_back(normal_vector(rng, f));
  }
  {
    Rng rng(derive_seed(config.seed, "synth.background"));
    for (std::int64_t b = 0; b < kBackgroundTypes; ++b)
      result.latents.background_centroids.push_back(normal_vector(rng, f));
  }
  {
    // positive-leaning raw inputs keep an identity-initialized ReLU
    // encoder from zeroing them out at the start of training
    Rng rng(derive_seed(config.seed, "synth.scene"));
    for (std::int64_t s = 0; s < config.n_scene_types; ++s) {
      Tensor t = Tensor::zeros({f});
      for (std::int64_t i = 0; i < f; ++i) t.mutable_data()[i] = rng.uniform(0.1, 1.1);
      result.latents.scene_centroids.push_back(t);
    }
  }

  const std::int64_t label_universe = 5 * config.n_scene_types + 5;
  for (std::int64_t img = 0; img < config.n_images; ++img) {
    Rng rng(derive_seed(config.seed, "synth.image", img));
    ImageRecord record;
    record.image_id = "synth_" + std::to_string(img);

    const std::int64_t s = rng.uniform_int(0, config.n_scene_types - 1);
    result.latents.scene_types.push_back(s);
    const std::int64_t b = rng.uniform_int(0, kBackgroundTypes - 1);
    result.latents.background_ids.push_back(b);
    const std::int64_t n = rng.uniform_int(config.min_persons, config.max_persons);
    record.n_persons = n;

    std::vector<std::int64_t> roles;
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t role = rng.uniform_int(0, kRoles - 1);
      roles.push_back(role);
      record.person_features.push_back(
          noisy(result.latents.role_centroids[static_cast<std::size_t>(role)], rng,
                config.noise * kPersonNoise));
      const double x0 = 10.0 * static_cast<double>(i) + rng.uniform(0.0, 2.0);
      const double y0 = rng.uniform(0.0, 2.0);
      record.boxes.push_back({x0, y0, x0 + 6.0 + rng.uniform(0.0, 4.0),
                              y0 + 6.0 + rng.uniform(0.0, 4.0)});
    }
    result.latents.roles.push_back(roles);

    for (const auto& [i, j] : all_pairs(n)) {
      const std::int64_t role_sum = roles[static_cast<std::size_t>(i)] +
                                    roles[static_cast<std::size_t>(j)];
      const bool same_role = roles[static_cast<std::size_t>(i)] ==
                             roles[static_cast<std::size_t>(j)];
      // distinct role sums span 0..2(R-1); quantize them into C steps
      const std::int64_t span = 2 * (kRoles - 1) + 1;
      const std::int64_t base_label =
          same_role ? s % config.n_classes
                    : (role_sum * config.n_classes / span + b) % config.n_classes;
      std::int64_t label = base_label;
      if (rng.uniform() < kLabelFlipRate) {
        const std::int64_t shift = rng.uniform_int(1, config.n_classes - 1);
        label = (label + shift) % config.n_classes;
      }
      record.pair_labels[{i, j}] = label;

      Tensor x_ij = Tensor::zeros({f});
      const Tensor& xi = record.person_features[static_cast<std::size_t>(i)];
      const Tensor& xj = record.person_features[static_cast<std::size_t>(j)];
      const std::int64_t delta =
          (label - base_label + config.n_classes) % config.n_classes;
      const Tensor& offset = result.latents.class_offsets[static_cast<std::size_t>(delta)];
      for (std::int64_t k = 0; k < f; ++k)
        x_ij.mutable_data()[k] = kPairMeanScale * 0.5 * (xi[k] + xj[k]) +
                                 kPairOffsetScale * offset[k];
      record.union_features.push_back(noisy(x_ij, rng, config.noise * kPairNoise));
    }

    record.background_feature =
        noisy(result.latents.background_centroids[static_cast<std::size_t>(b)], rng,
              config.noise * kBackgroundNoise);
    record.raw_scene_input =
        noisy(result.latents.scene_centroids[static_cast<std::size_t>(s)], rng,
              config.noise * kRawSceneNoise);

    // pseudo top-5: each scene type owns five consecutive label ids;
    // Gumbel noise lets outside ids intrude as the noise level grows
    std::vector<std::pair<double, std::int64_t>> scored;
    for (std::int64_t p = 0; p < label_universe; ++p) {
      const bool in_signature = p >= 5 * s && p < 5 * (s + 1);
      const double score = (in_signature ? kSignatureScore : 0.0) +
                           config.noise * kGumbelScale * rng.gumbel();
      scored.emplace_back(-score, p);  // ascending sort puts the best first
    }
    std::stable_sort(scored.begin(), scored.end());
    for (int k = 0; k < 5; ++k) record.pseudo_top5.push_back(scored[static_cast<std::size_t>(k)].second);

    if (const auto problem = validate_record(record, f))
      throw Error("generator produced an invalid record: " + *problem);
    result.dataset.records.push_back(std::move(record));
  }
  return result;
}

}  // namespace prise
