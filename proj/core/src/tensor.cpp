#include "prise/tensor.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>

namespace prise {

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw ShapeError("softmax: empty logits");
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - hi);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

std::string format_double(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace prise
