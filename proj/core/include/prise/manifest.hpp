#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace prise {

inline constexpr const char* kToolVersion = "prise 0.1.0";

// Provenance record written next to every artifact a tool run produces.
// The config field holds the fully resolved configuration (defaults, config
// file, and command-line flags already merged), so a run can be repeated
// from the manifest alone.
struct RunManifest {
  std::string subcommand;
  std::string config_json = "{}";
  std::uint64_t seed = 0;
  std::vector<std::string> input_paths;
  std::vector<std::string> output_paths;
  std::string tool_version = kToolVersion;
  double wall_seconds = 0.0;
};

// Serialized manifest. config_json must parse as a JSON object; it is
// embedded as an object, not as an escaped string.
std::string manifest_json(const RunManifest& manifest);

// Sidecar path for an artifact: "<artifact>.run.json".
std::string manifest_path_for(const std::string& artifact_path);

// Writes the manifest next to each output artifact. A reader never sees a
// partial manifest: the bytes land in a temp file first and are renamed
// into place.
void write_manifest(const RunManifest& manifest);

// Whole-file text write with the same temp-and-rename discipline.
void write_text_file_atomically(const std::string& path, const std::string& contents);

}  // namespace prise
