#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prise/tensor.hpp"

namespace prise {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. One state slot per parameter tensor; the
/// caller owns the parameters and passes matching slot indices each step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  /// Registers a parameter and returns its slot. The name is used in
  /// error messages only.
  std::int64_t add_slot(const Shape& shape, std::string name = "");

  /// Applies one update to `param` in place. Gradient shape must match
  /// the slot shape; a non-finite gradient aborts naming the slot.
  /// Steps are counted per slot.
  void step(std::int64_t slot, Tensor& param, const Tensor& grad);

  const AdamConfig& config() const { return config_; }
  std::int64_t slot_count() const { return static_cast<std::int64_t>(m_.size()); }
  std::int64_t step_count(std::int64_t slot) const { return t_[static_cast<std::size_t>(slot)]; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::vector<std::int64_t> t_;
  std::vector<std::string> names_;
};

}  // namespace prise
