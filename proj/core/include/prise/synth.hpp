#pragma once

#include <cstdint>
#include <vector>

#include "prise/dataset.hpp"
#include "prise/tensor.hpp"

namespace prise {

struct SynthConfig {
  std::int64_t n_images = 500;
  std::int64_t feature_dim = 32;    // >= 4
  std::int64_t n_classes = 3;       // >= 2
  std::int64_t n_scene_types = 4;   // >= 2
  std::int64_t min_persons = 2;     // persons per image drawn uniformly
  std::int64_t max_persons = 4;
  double noise = 1.0;               // scales every Gaussian/Gumbel draw
  std::uint64_t seed = 0;
};

/// The hidden variables behind a generated dataset, returned so tests
/// can check recovery against the ground truth. Never written to disk.
struct SynthLatents {
  std::vector<std::int64_t> scene_types;             // per image
  std::vector<std::int64_t> background_ids;          // per image, binary
  std::vector<std::vector<std::int64_t>> roles;      // per image, per person
  std::vector<Tensor> role_centroids;                // person feature means
  std::vector<Tensor> class_offsets;                 // union offsets, by flip delta
  std::vector<Tensor> background_centroids;          // per background id
  std::vector<Tensor> scene_centroids;               // raw scene input means
  double pair_offset_scale = 0.0;                    // weight on class_offsets
  double pair_mean_scale = 0.0;                      // weight on the person mean
};

struct SynthResult {
  Dataset dataset;
  SynthLatents latents;
};

/// Seeded synthetic dataset with planted structure, laid out so that
/// each input stream carries information none of the others has. Per
/// image: a latent scene type s drives the raw scene input and the
/// pseudo top-5 labels, and a separate binary latent b drives the
/// background feature. Each person gets a latent role, visible almost
/// cleanly in its feature. A same-role pair takes its class from s;
/// every other pair quantizes its role sum into C steps and shifts the
/// step by b mod C, so the roles, the scene and the background are all
/// needed to decode the rule. A small fraction of labels is then
/// resampled; only the union feature tracks those flips. It carries an
/// offset indexed by the flip delta (final minus rule class, mod C)
/// next to a faint person-mean term, so it corrects the rule's output
/// but says nothing about the label on its own.
SynthResult generate_synthetic(const SynthConfig& config);

}  // namespace prise
