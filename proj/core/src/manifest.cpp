#include "prise/manifest.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "prise/errors.hpp"

namespace prise {

void write_text_file_atomically(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot move " + tmp + " into place");
}

std::string manifest_json(const RunManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["subcommand"] = manifest.subcommand;
  try {
    doc["config"] = nlohmann::ordered_json::parse(manifest.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw Error("manifest config is not valid JSON: " + std::string(e.what()));
  }
  if (!doc["config"].is_object()) throw Error("manifest config must be a JSON object");
  doc["seed"] = manifest.seed;
  doc["inputs"] = manifest.input_paths;
  doc["outputs"] = manifest.output_paths;
  doc["tool_version"] = manifest.tool_version;
  doc["wall_seconds"] = manifest.wall_seconds;
  return doc.dump(2) + "\n";
}

std::string manifest_path_for(const std::string& artifact_path) {
  return artifact_path + ".run.json";
}

void write_manifest(const RunManifest& manifest) {
  const std::string body = manifest_json(manifest);
  for (const auto& artifact : manifest.output_paths)
    write_text_file_atomically(manifest_path_for(artifact), body);
}

}  // namespace prise
