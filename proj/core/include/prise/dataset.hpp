#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prise/tensor.hpp"

namespace prise {

/// One image with its precomputed feature streams. Boxes are carried for
/// provenance only; nothing downstream reads them.
struct ImageRecord {
  std::string image_id;
  std::int64_t n_persons = 0;
  std::vector<std::array<double, 4>> boxes;    // one per person
  std::vector<Tensor> person_features;         // N vectors of dimension F
  std::vector<Tensor> union_features;          // one per unordered pair, (i,j) i<j in
                                               // lexicographic order
  Tensor background_feature;                   // F
  Tensor raw_scene_input;                      // F, input to the scene encoder
  std::vector<std::int64_t> pseudo_top5;       // 5 distinct scene-class ids
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> pair_labels;  // optional
};

struct Dataset {
  std::int64_t version = 1;
  std::int64_t feature_dim = 0;   // F
  std::int64_t n_classes = 0;     // C
  std::int64_t n_scene_types = 0; // S
  std::vector<ImageRecord> records;
};

struct DatasetSummary {
  std::int64_t n_images = 0;
  std::int64_t n_pairs = 0;
  std::int64_t n_labeled_pairs = 0;
  std::map<std::int64_t, std::int64_t> class_counts;
  std::map<std::int64_t, std::int64_t> persons_histogram;
};

/// Number of unordered pairs for n persons.
std::int64_t pair_count(std::int64_t n);

/// Index of pair (i, j), i < j, in lexicographic pair order.
std::int64_t pair_index(std::int64_t n, std::int64_t i, std::int64_t j);

/// All pairs (i, j) with i < j in lexicographic order.
std::vector<std::pair<std::int64_t, std::int64_t>> all_pairs(std::int64_t n);

/// First violated invariant as text, or nothing if the record is sound.
std::optional<std::string> validate_record(const ImageRecord& record, std::int64_t feature_dim);

/// Reads, parses and validates a dataset file. Throws DataError with the
/// offending line or record named.
Dataset load_dataset(const std::string& path);

/// Writes the dataset in the line-delimited format read by load_dataset.
/// Output is byte-identical for identical in-memory data.
void save_dataset(const Dataset& dataset, const std::string& path);

DatasetSummary summarize(const Dataset& dataset);

/// New dataset holding the records at `indices`, in the given order.
Dataset subset_dataset(const Dataset& dataset, const std::vector<std::int64_t>& indices);

}  // namespace prise
