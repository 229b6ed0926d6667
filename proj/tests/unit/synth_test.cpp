#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include "prise/errors.hpp"
#include "prise/rng.hpp"
#include "prise/synth.hpp"

using namespace prise;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
    std::remove(path.c_str());
  }
  ~TempFile() { std::remove(path.c_str()); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

double plug_in_mi(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  REQUIRE(a.size() == b.size());
  const double n = static_cast<double>(a.size());
  std::map<std::int64_t, double> pa, pb;
  std::map<std::pair<std::int64_t, std::int64_t>, double> pab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
    pab[{a[i], b[i]}] += 1.0 / n;
  }
  double mi = 0.0;
  for (const auto& [key, pj] : pab) mi += pj * std::log(pj / (pa[key.first] * pb[key.second]));
  return mi;
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("configs outside the contract are rejected") {
  SynthConfig config;
  config.n_classes = 1;
  CHECK_THROWS_AS(generate_synthetic(config), UsageError);
  config = SynthConfig{};
  config.n_scene_types = 1;
  CHECK_THROWS_AS(generate_synthetic(config), UsageError);
  config = SynthConfig{};
  config.feature_dim = 3;
  CHECK_THROWS_AS(generate_synthetic(config), UsageError);
  config = SynthConfig{};
  config.min_persons = 3;
  config.max_persons = 2;
  CHECK_THROWS_AS(generate_synthetic(config), UsageError);
  config = SynthConfig{};
  config.noise = -0.5;
  CHECK_THROWS_AS(generate_synthetic(config), UsageError);
}

TEST_CASE("generation is a pure function of the config") {
  SynthConfig config;
  config.n_images = 10;
  config.seed = 123;
  const SynthResult a = generate_synthetic(config);
  const SynthResult b = generate_synthetic(config);

  TempFile file_a("prise_synth_a.jsonl"), file_b("prise_synth_b.jsonl");
  save_dataset(a.dataset, file_a.path);
  save_dataset(b.dataset, file_b.path);
  CHECK(read_file(file_a.path) == read_file(file_b.path));
  CHECK(a.latents.scene_types == b.latents.scene_types);

  config.seed = 124;
  const SynthResult c = generate_synthetic(config);
  TempFile file_c("prise_synth_c.jsonl");
  save_dataset(c.dataset, file_c.path);
  CHECK(read_file(file_c.path) != read_file(file_a.path));
}

TEST_CASE("every generated record validates and matches the config ranges") {
  SynthConfig config;
  config.n_images = 60;
  config.min_persons = 2;
  config.max_persons = 5;
  config.seed = 9;
  const SynthResult result = generate_synthetic(config);
  REQUIRE(result.dataset.records.size() == 60);
  REQUIRE(result.latents.scene_types.size() == 60);
  REQUIRE(result.latents.background_ids.size() == 60);
  for (std::size_t i = 0; i < result.dataset.records.size(); ++i) {
    const ImageRecord& r = result.dataset.records[i];
    CHECK_FALSE(validate_record(r, config.feature_dim).has_value());
    CHECK(r.n_persons >= 2);
    CHECK(r.n_persons <= 5);
    CHECK(result.latents.scene_types[i] >= 0);
    CHECK(result.latents.scene_types[i] < config.n_scene_types);
    CHECK(result.latents.background_ids[i] >= 0);
    CHECK(result.latents.background_ids[i] < 2);
    for (const auto& [pair, label] : r.pair_labels) {
      CHECK(label >= 0);
      CHECK(label < config.n_classes);
    }
    // pair labels cover every pair
    CHECK(static_cast<std::int64_t>(r.pair_labels.size()) == pair_count(r.n_persons));
  }
}

TEST_CASE("a generated dataset round-trips through the file format") {
  SynthConfig config;
  config.n_images = 15;
  config.seed = 77;
  const SynthResult result = generate_synthetic(config);
  TempFile file("prise_synth_roundtrip.jsonl");
  save_dataset(result.dataset, file.path);
  const Dataset loaded = load_dataset(file.path);
  REQUIRE(loaded.records.size() == result.dataset.records.size());
  CHECK(loaded.feature_dim == result.dataset.feature_dim);
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    const ImageRecord& was = result.dataset.records[i];
    const ImageRecord& now = loaded.records[i];
    CHECK(now.image_id == was.image_id);
    CHECK(now.pair_labels == was.pair_labels);
    CHECK(now.pseudo_top5 == was.pseudo_top5);
    for (std::int64_t p = 0; p < was.n_persons; ++p)
      CHECK(now.person_features[static_cast<std::size_t>(p)].to_vector() ==
            was.person_features[static_cast<std::size_t>(p)].to_vector());
    CHECK(now.raw_scene_input.to_vector() == was.raw_scene_input.to_vector());
  }
}

TEST_CASE("noise-free union features sit exactly on their flip-delta centroid") {
  SynthConfig config;
  config.n_images = 40;
  config.noise = 0.0;
  config.seed = 5;
  const SynthResult result = generate_synthetic(config);
  const double alpha = result.latents.pair_offset_scale;
  const double mu = result.latents.pair_mean_scale;
  std::int64_t checked = 0;
  std::int64_t flipped = 0;
  for (std::size_t img = 0; img < result.dataset.records.size(); ++img) {
    const ImageRecord& r = result.dataset.records[img];
    const std::vector<std::int64_t>& roles = result.latents.roles[img];
    const std::int64_t s = result.latents.scene_types[img];
    const std::int64_t bg = result.latents.background_ids[img];
    for (const auto& [pair, label] : r.pair_labels) {
      const std::int64_t ra = roles[static_cast<std::size_t>(pair.first)];
      const std::int64_t rb = roles[static_cast<std::size_t>(pair.second)];
      const std::int64_t base =
          ra == rb ? s % config.n_classes
                   : ((ra + rb) * config.n_classes / 7 + bg) % config.n_classes;
      const std::int64_t delta = (label - base + config.n_classes) % config.n_classes;
      if (delta != 0) ++flipped;

      const std::int64_t idx = pair_index(r.n_persons, pair.first, pair.second);
      const Tensor& x_ij = r.union_features[static_cast<std::size_t>(idx)];
      const Tensor& xi = r.person_features[static_cast<std::size_t>(pair.first)];
      const Tensor& xj = r.person_features[static_cast<std::size_t>(pair.second)];
      // nearest centroid over candidate deltas recovers the planted one
      std::int64_t best = -1;
      double best_dist = 0.0;
      for (std::int64_t c = 0; c < config.n_classes; ++c) {
        const Tensor& offset = result.latents.class_offsets[static_cast<std::size_t>(c)];
        double dist = 0.0;
        for (std::int64_t k = 0; k < config.feature_dim; ++k) {
          const double d = x_ij[k] - (mu * 0.5 * (xi[k] + xj[k]) + alpha * offset[k]);
          dist += d * d;
        }
        if (best < 0 || dist < best_dist) {
          best = c;
          best_dist = dist;
        }
      }
      CHECK(best == delta);
      ++checked;
    }
  }
  CHECK(checked > 50);
  CHECK(flipped > 0);  // some labels were resampled, so deltas are exercised
}

TEST_CASE("class histogram matches the closed-form planted distribution") {
  SynthConfig config;
  config.n_images = 600;
  config.seed = 2024;
  const SynthResult result = generate_synthetic(config);

  // base distribution before flips: same-role pairs take the scene's
  // class, the rest quantize the role sum into C steps shifted by the
  // background bit
  const std::int64_t C = config.n_classes;
  const std::int64_t S = config.n_scene_types;
  std::vector<double> base(static_cast<std::size_t>(C), 0.0);
  for (std::int64_t a = 0; a < 4; ++a) {
    for (std::int64_t b = 0; b < 4; ++b) {
      if (a == b) {
        for (std::int64_t s = 0; s < S; ++s)
          base[static_cast<std::size_t>(s % C)] += (1.0 / 16.0) * (1.0 / static_cast<double>(S));
      } else {
        for (std::int64_t bg = 0; bg < 2; ++bg)
          base[static_cast<std::size_t>(((a + b) * C / 7 + bg) % C)] += (1.0 / 16.0) * 0.5;
      }
    }
  }
  const double flip = 0.06;
  std::vector<double> expected(static_cast<std::size_t>(C));
  for (std::int64_t c = 0; c < C; ++c)
    expected[static_cast<std::size_t>(c)] =
        (1.0 - flip) * base[static_cast<std::size_t>(c)] +
        flip * (1.0 - base[static_cast<std::size_t>(c)]) / static_cast<double>(C - 1);

  std::vector<std::int64_t> counts(static_cast<std::size_t>(C), 0);
  std::int64_t total = 0;
  for (const ImageRecord& r : result.dataset.records)
    for (const auto& [pair, label] : r.pair_labels) {
      counts[static_cast<std::size_t>(label)] += 1;
      ++total;
    }
  for (std::int64_t c = 0; c < C; ++c) {
    const double p = expected[static_cast<std::size_t>(c)];
    const double sigma = std::sqrt(static_cast<double>(total) * p * (1.0 - p));
    const double observed = static_cast<double>(counts[static_cast<std::size_t>(c)]);
    CHECK(std::abs(observed - static_cast<double>(total) * p) <= 3.0 * sigma);
  }
}

TEST_CASE("top pseudo label carries real scene information") {
  SynthConfig config;
  config.n_images = 300;
  config.seed = 404;
  const SynthResult result = generate_synthetic(config);
  std::vector<std::int64_t> top1;
  for (const ImageRecord& r : result.dataset.records) top1.push_back(r.pseudo_top5[0]);

  const double observed = plug_in_mi(top1, result.latents.scene_types);
  Rng rng(555);
  std::vector<std::int64_t> shuffled = result.latents.scene_types;
  int at_least_as_high = 0;
  const int n_permutations = 200;
  for (int t = 0; t < n_permutations; ++t) {
    rng.shuffle(shuffled);
    if (plug_in_mi(top1, shuffled) >= observed) ++at_least_as_high;
  }
  // p = (1 + hits) / (1 + permutations) must come out below 0.01
  CHECK(at_least_as_high == 0);
}

TEST_CASE("pseudo labels without noise are the scene's signature block") {
  SynthConfig config;
  config.n_images = 30;
  config.noise = 0.0;
  config.seed = 71;
  const SynthResult result = generate_synthetic(config);
  for (std::size_t i = 0; i < result.dataset.records.size(); ++i) {
    const std::int64_t s = result.latents.scene_types[i];
    const auto& top5 = result.dataset.records[i].pseudo_top5;
    for (int k = 0; k < 5; ++k) CHECK(top5[static_cast<std::size_t>(k)] == 5 * s + k);
  }
}

TEST_SUITE_END();
