#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "prise/tensor.hpp"

namespace prise {

/// Named tensors plus an opaque JSON metadata string (config snapshot,
/// epoch, metric history). Tensor bytes are stored exactly, so a
/// save/load round trip reproduces forward passes bitwise.
struct Checkpoint {
  std::string meta_json = "{}";
  std::vector<std::pair<std::string, Tensor>> tensors;  // insertion order preserved

  const Tensor& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
};

/// Writes the binary blob at `path` (atomically, via a temp file) plus a
/// human-readable sidecar `<path>.manifest.txt` listing name, shape and
/// checksum per tensor.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);

Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over the serialized little-endian tensor payload, as printed
/// in the manifest sidecar.
std::uint64_t tensor_checksum(const Tensor& t);

}  // namespace prise
