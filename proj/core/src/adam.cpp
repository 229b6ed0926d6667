#include "prise/adam.hpp"

#include <cmath>

namespace prise {

Adam::Adam(AdamConfig config) : config_(config) {
  if (config_.lr < 0.0) throw Error("adam: lr must be non-negative");
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 || config_.beta2 >= 1.0)
    throw Error("adam: betas must lie in [0, 1)");
  if (config_.eps <= 0.0) throw Error("adam: eps must be positive");
}

std::int64_t Adam::add_slot(const Shape& shape, std::string name) {
  m_.push_back(Tensor::zeros(shape));
  v_.push_back(Tensor::zeros(shape));
  t_.push_back(0);
  if (name.empty()) name = "param" + std::to_string(m_.size() - 1);
  names_.push_back(std::move(name));
  return static_cast<std::int64_t>(m_.size()) - 1;
}

void Adam::step(std::int64_t slot, Tensor& param, const Tensor& grad) {
  const std::size_t s = static_cast<std::size_t>(slot);
  if (s >= m_.size()) throw Error("adam: unknown slot " + std::to_string(slot));
  if (!param.same_shape(m_[s]) || !grad.same_shape(m_[s]))
    throw ShapeError("adam: param shape " + shape_to_string(param.shape()) + " or grad shape " +
                     shape_to_string(grad.shape()) + " does not match slot shape " +
                     shape_to_string(m_[s].shape()));
  if (!grad.all_finite())
    throw NumericError("adam: non-finite gradient for parameter " + names_[s]);
  t_[s] += 1;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_[s]));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_[s]));
  double* md = m_[s].mutable_data();
  double* vd = v_[s].mutable_data();
  double* pd = param.mutable_data();
  const double* gd = grad.data();
  for (std::int64_t i = 0; i < param.size(); ++i) {
    md[i] = b1 * md[i] + (1.0 - b1) * gd[i];
    vd[i] = b2 * vd[i] + (1.0 - b2) * gd[i] * gd[i];
    const double mhat = md[i] / bc1;
    const double vhat = vd[i] / bc2;
    pd[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
  }
}

}  // namespace prise
