#include "prise/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace prise {

namespace {

using nlohmann::json;

json tensor_to_json(const Tensor& t) {
  json a = json::array();
  for (std::int64_t i = 0; i < t.size(); ++i) a.push_back(t[i]);
  return a;
}

Tensor tensor_from_json(const json& a) {
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) v.push_back(x.get<double>());
  return Tensor::from_vector(std::move(v));
}

}  // namespace

std::int64_t pair_count(std::int64_t n) { return n * (n - 1) / 2; }

std::int64_t pair_index(std::int64_t n, std::int64_t i, std::int64_t j) {
  if (!(0 <= i && i < j && j < n))
    throw Error("pair_index: bad pair (" + std::to_string(i) + ", " + std::to_string(j) +
                ") for n=" + std::to_string(n));
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

std::vector<std::pair<std::int64_t, std::int64_t>> all_pairs(std::int64_t n) {
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  pairs.reserve(static_cast<std::size_t>(pair_count(n)));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  return pairs;
}

std::optional<std::string> validate_record(const ImageRecord& record, std::int64_t feature_dim) {
  const std::int64_t n = record.n_persons;
  if (n < 1) return "n_persons: must be at least 1, got " + std::to_string(n);
  if (static_cast<std::int64_t>(record.boxes.size()) != n)
    return "boxes: expected " + std::to_string(n) + " entries, got " +
           std::to_string(record.boxes.size());
  if (static_cast<std::int64_t>(record.person_features.size()) != n)
    return "person_features: expected " + std::to_string(n) + " entries, got " +
           std::to_string(record.person_features.size());
  for (std::int64_t i = 0; i < n; ++i) {
    const Tensor& x = record.person_features[static_cast<std::size_t>(i)];
    if (x.rank() != 1 || x.size() != feature_dim)
      return "person_features[" + std::to_string(i) + "]: dimension " +
             std::to_string(x.size()) + ", expected " + std::to_string(feature_dim);
  }
  const std::int64_t np = pair_count(n);
  if (static_cast<std::int64_t>(record.union_features.size()) != np) {
    const auto pairs = all_pairs(n);
    const std::size_t have = record.union_features.size();
    std::string missing = have < pairs.size()
                              ? " (first missing pair (" + std::to_string(pairs[have].first) +
                                    ", " + std::to_string(pairs[have].second) + "))"
                              : "";
    return "union_features: expected " + std::to_string(np) + " entries, got " +
           std::to_string(have) + missing;
  }
  for (std::int64_t p = 0; p < np; ++p) {
    const Tensor& x = record.union_features[static_cast<std::size_t>(p)];
    if (x.rank() != 1 || x.size() != feature_dim)
      return "union_features[" + std::to_string(p) + "]: dimension " + std::to_string(x.size()) +
             ", expected " + std::to_string(feature_dim);
  }
  if (record.background_feature.rank() != 1 || record.background_feature.size() != feature_dim)
    return "background_feature: dimension " + std::to_string(record.background_feature.size()) +
           ", expected " + std::to_string(feature_dim);
  if (record.raw_scene_input.rank() != 1 || record.raw_scene_input.size() != feature_dim)
    return "raw_scene_input: dimension " + std::to_string(record.raw_scene_input.size()) +
           ", expected " + std::to_string(feature_dim);
  if (record.pseudo_top5.size() != 5)
    return "pseudo_top5: expected 5 entries, got " + std::to_string(record.pseudo_top5.size());
  {
    std::set<std::int64_t> uniq(record.pseudo_top5.begin(), record.pseudo_top5.end());
    if (uniq.size() != 5) return "pseudo_top5: entries must be distinct";
  }
  for (const auto& [pair, label] : record.pair_labels) {
    if (!(0 <= pair.first && pair.first < pair.second && pair.second < n))
      return "pair_labels: invalid pair (" + std::to_string(pair.first) + ", " +
             std::to_string(pair.second) + ") for n_persons=" + std::to_string(n);
    if (label < 0)
      return "pair_labels: negative class for pair (" + std::to_string(pair.first) + ", " +
             std::to_string(pair.second) + ")";
  }
  return std::nullopt;
}

namespace {

json record_to_json(const ImageRecord& r) {
  json o;
  o["image_id"] = r.image_id;
  o["n_persons"] = r.n_persons;
  json boxes = json::array();
  for (const auto& b : r.boxes) boxes.push_back({b[0], b[1], b[2], b[3]});
  o["boxes"] = boxes;
  json pf = json::array();
  for (const auto& t : r.person_features) pf.push_back(tensor_to_json(t));
  o["person_features"] = pf;
  json uf = json::array();
  for (const auto& t : r.union_features) uf.push_back(tensor_to_json(t));
  o["union_features"] = uf;
  o["background_feature"] = tensor_to_json(r.background_feature);
  o["raw_scene_input"] = tensor_to_json(r.raw_scene_input);
  o["pseudo_top5"] = r.pseudo_top5;
  json labels = json::array();
  for (const auto& [pair, label] : r.pair_labels)
    labels.push_back({pair.first, pair.second, label});
  o["pair_labels"] = labels;
  return o;
}

ImageRecord record_from_json(const json& o) {
  ImageRecord r;
  r.image_id = o.at("image_id").get<std::string>();
  r.n_persons = o.at("n_persons").get<std::int64_t>();
  for (const auto& b : o.at("boxes"))
    r.boxes.push_back({b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                       b.at(3).get<double>()});
  for (const auto& t : o.at("person_features")) r.person_features.push_back(tensor_from_json(t));
  for (const auto& t : o.at("union_features")) r.union_features.push_back(tensor_from_json(t));
  r.background_feature = tensor_from_json(o.at("background_feature"));
  r.raw_scene_input = tensor_from_json(o.at("raw_scene_input"));
  r.pseudo_top5 = o.at("pseudo_top5").get<std::vector<std::int64_t>>();
  for (const auto& l : o.at("pair_labels"))
    r.pair_labels[{l.at(0).get<std::int64_t>(), l.at(1).get<std::int64_t>()}] =
        l.at(2).get<std::int64_t>();
  return r;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path);
  Dataset ds;
  std::string line;
  std::int64_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json o;
    try {
      o = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
    }
    try {
      if (!have_header) {
        if (o.value("format", "") != "prise.dataset")
          throw DataError(path + ":1: missing or wrong format header");
        ds.version = o.at("version").get<std::int64_t>();
        if (ds.version != 1)
          throw DataError(path + ":1: unsupported format version " + std::to_string(ds.version));
        ds.feature_dim = o.at("f").get<std::int64_t>();
        ds.n_classes = o.at("classes").get<std::int64_t>();
        ds.n_scene_types = o.at("scene_types").get<std::int64_t>();
        have_header = true;
        continue;
      }
      ImageRecord r = record_from_json(o);
      if (auto err = validate_record(r, ds.feature_dim))
        throw DataError(path + ":" + std::to_string(line_no) + ": record " + r.image_id + ": " +
                        *err);
      for (const auto& [pair, label] : r.pair_labels)
        if (label >= ds.n_classes)
          throw DataError(path + ":" + std::to_string(line_no) + ": record " + r.image_id +
                          ": pair_labels: class " + std::to_string(label) + " out of range for C=" +
                          std::to_string(ds.n_classes));
      ds.records.push_back(std::move(r));
    } catch (const DataError&) {
      throw;
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
  }
  if (!have_header) throw DataError(path + ": empty file, expected a header line");
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write dataset file " + path);
  json header;
  header["format"] = "prise.dataset";
  header["version"] = dataset.version;
  header["f"] = dataset.feature_dim;
  header["classes"] = dataset.n_classes;
  header["scene_types"] = dataset.n_scene_types;
  out << header.dump() << "\n";
  for (const ImageRecord& r : dataset.records) out << record_to_json(r).dump() << "\n";
  if (!out) throw DataError("write failed for dataset file " + path);
}

DatasetSummary summarize(const Dataset& dataset) {
  DatasetSummary s;
  s.n_images = static_cast<std::int64_t>(dataset.records.size());
  for (const ImageRecord& r : dataset.records) {
    s.n_pairs += pair_count(r.n_persons);
    s.persons_histogram[r.n_persons] += 1;
    for (const auto& [pair, label] : r.pair_labels) {
      s.n_labeled_pairs += 1;
      s.class_counts[label] += 1;
    }
  }
  return s;
}

Dataset subset_dataset(const Dataset& dataset, const std::vector<std::int64_t>& indices) {
  Dataset out;
  out.version = dataset.version;
  out.feature_dim = dataset.feature_dim;
  out.n_classes = dataset.n_classes;
  out.n_scene_types = dataset.n_scene_types;
  out.records.reserve(indices.size());
  for (const std::int64_t i : indices) {
    if (i < 0 || i >= static_cast<std::int64_t>(dataset.records.size()))
      throw Error("subset_dataset: index " + std::to_string(i) + " out of range");
    out.records.push_back(dataset.records[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace prise
