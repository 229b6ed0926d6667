#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "prise/errors.hpp"

namespace prise {

using Shape = std::vector<std::int64_t>;

std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor over a real scalar type. 64-bit is the default
/// throughout the library; the 32-bit instantiation is an opt-in for
/// forward-only paths. Buffers are shared copy-on-write, so passing
/// tensors by value is cheap and a tensor is immutable to every holder
/// until someone asks for mutable access.
template <typename Scalar = double>
class TensorOf {
 public:
  /// Rank-0 scalar holding zero.
  TensorOf() : shape_{}, data_(std::make_shared<std::vector<Scalar>>(1, Scalar(0))) {}

  static TensorOf zeros(Shape shape) { return TensorOf(std::move(shape), Scalar(0)); }

  static TensorOf full(Shape shape, Scalar value) { return TensorOf(std::move(shape), value); }

  static TensorOf scalar(Scalar value) {
    TensorOf t;
    (*t.data_)[0] = value;
    return t;
  }

  static TensorOf from_vector(std::vector<Scalar> values) {
    TensorOf t;
    t.shape_ = {static_cast<std::int64_t>(values.size())};
    t.data_ = std::make_shared<std::vector<Scalar>>(std::move(values));
    t.check_extents();
    return t;
  }

  static TensorOf matrix(std::int64_t rows, std::int64_t cols, std::vector<Scalar> values) {
    if (static_cast<std::int64_t>(values.size()) != rows * cols)
      throw ShapeError("matrix: " + std::to_string(values.size()) + " values for shape " +
                       shape_to_string({rows, cols}));
    TensorOf t;
    t.shape_ = {rows, cols};
    t.data_ = std::make_shared<std::vector<Scalar>>(std::move(values));
    t.check_extents();
    return t;
  }

  static TensorOf identity(std::int64_t n) {
    TensorOf t = zeros({n, n});
    Scalar* d = t.mutable_data();
    for (std::int64_t i = 0; i < n; ++i) d[i * n + i] = Scalar(1);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_->size()); }

  std::int64_t rows() const {
    require_rank(2, "rows");
    return shape_[0];
  }
  std::int64_t cols() const {
    require_rank(2, "cols");
    return shape_[1];
  }

  const Scalar* data() const { return data_->data(); }

  /// Mutable access; detaches from any sharers first.
  Scalar* mutable_data() {
    if (data_.use_count() > 1) data_ = std::make_shared<std::vector<Scalar>>(*data_);
    return data_->data();
  }

  Scalar operator[](std::int64_t i) const { return (*data_)[static_cast<std::size_t>(i)]; }

  Scalar operator()(std::int64_t r, std::int64_t c) const {
    require_rank(2, "operator()");
    return (*data_)[static_cast<std::size_t>(r * shape_[1] + c)];
  }

  /// The single element of a size-1 tensor.
  Scalar item() const {
    if (size() != 1)
      throw ShapeError("item: tensor has shape " + shape_to_string(shape_) + ", expected a scalar");
    return (*data_)[0];
  }

  std::vector<Scalar> to_vector() const { return *data_; }

  bool same_shape(const TensorOf& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (const Scalar v : *data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool shares_buffer(const TensorOf& other) const { return data_ == other.data_; }

 private:
  TensorOf(Shape shape, Scalar fill) : shape_(std::move(shape)) {
    check_extents();
    std::int64_t n = 1;
    for (const std::int64_t e : shape_) n *= e;
    data_ = std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(n), fill);
  }

  void check_extents() const {
    for (const std::int64_t e : shape_)
      if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape_));
  }

  void require_rank(std::int64_t r, const char* op) const {
    if (rank() != r)
      throw ShapeError(std::string(op) + ": tensor of shape " + shape_to_string(shape_) +
                       " is not rank-" + std::to_string(r));
  }

  Shape shape_;
  std::shared_ptr<std::vector<Scalar>> data_;
};

using Tensor = TensorOf<double>;
using TensorF32 = TensorOf<float>;

enum class EwKind { relu, sigmoid, add, sub, mul };
enum class ReduceKind { sum, mean, max_elementwise_over_list };

// ---------------------------------------------------------------------------
// Plain forward kernels. The autograd tape reuses these for its forward pass;
// they are also the 32-bit opt-in surface.
// ---------------------------------------------------------------------------

template <typename S>
TensorOf<S> matmul(const TensorOf<S>& a, const TensorOf<S>& b);

template <typename S>
TensorOf<S> transpose(const TensorOf<S>& a);

/// Rank-1 x rank-1 outer product giving [len(u) x len(v)].
template <typename S>
TensorOf<S> outer(const TensorOf<S>& u, const TensorOf<S>& v);

template <typename S>
TensorOf<S> relu(const TensorOf<S>& x);

template <typename S>
TensorOf<S> sigmoid(const TensorOf<S>& x);

template <typename S>
TensorOf<S> add(const TensorOf<S>& a, const TensorOf<S>& b);

template <typename S>
TensorOf<S> sub(const TensorOf<S>& a, const TensorOf<S>& b);

template <typename S>
TensorOf<S> mul(const TensorOf<S>& a, const TensorOf<S>& b);

template <typename S>
TensorOf<S> scale(const TensorOf<S>& a, S factor);

template <typename S>
TensorOf<S> add_scalar(const TensorOf<S>& a, S value);

template <typename S>
TensorOf<S> sum(const TensorOf<S>& x);

template <typename S>
TensorOf<S> mean(const TensorOf<S>& x);

template <typename S>
TensorOf<S> max_list(const std::vector<TensorOf<S>>& inputs);

/// Kind-dispatched elementwise op; b must be provided for binary kinds
/// and absent for unary ones. Unknown kinds throw.
template <typename S>
TensorOf<S> elementwise(EwKind kind, const TensorOf<S>& a, const TensorOf<S>* b = nullptr);

template <typename S>
TensorOf<S> reduce(ReduceKind kind, const std::vector<TensorOf<S>>& inputs);

/// Numerically stable softmax of a rank-1 tensor (plain math, no tape).
std::vector<double> softmax(const std::vector<double>& logits);

/// Shortest decimal string that round-trips the exact double (%.17g trimmed).
std::string format_double(double v);

// --- template definitions ---------------------------------------------------

namespace detail {
template <typename S>
void require_same_shape(const TensorOf<S>& a, const TensorOf<S>& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape " + shape_to_string(a.shape()) +
                     " does not match shape " + shape_to_string(b.shape()));
}
}  // namespace detail

template <typename S>
TensorOf<S> matmul(const TensorOf<S>& a, const TensorOf<S>& b) {
  if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1))
    throw ShapeError("matmul: unsupported ranks for shapes " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  const std::int64_t m = a.shape()[0];
  const std::int64_t k = a.shape()[1];
  if (b.rank() == 1) {
    if (b.shape()[0] != k)
      throw ShapeError("matmul: inner extents disagree between " + shape_to_string(a.shape()) +
                       " and " + shape_to_string(b.shape()));
    TensorOf<S> y = TensorOf<S>::zeros({m});
    S* yd = y.mutable_data();
    const S* ad = a.data();
    const S* bd = b.data();
    for (std::int64_t i = 0; i < m; ++i) {
      S acc = S(0);
      const S* row = ad + i * k;
      for (std::int64_t j = 0; j < k; ++j) acc += row[j] * bd[j];
      yd[i] = acc;
    }
    return y;
  }
  if (b.shape()[0] != k)
    throw ShapeError("matmul: inner extents disagree between " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  const std::int64_t n = b.shape()[1];
  TensorOf<S> y = TensorOf<S>::zeros({m, n});
  S* yd = y.mutable_data();
  const S* ad = a.data();
  const S* bd = b.data();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t p = 0; p < k; ++p) {
      const S av = ad[i * k + p];
      if (av == S(0)) continue;
      const S* brow = bd + p * n;
      S* yrow = yd + i * n;
      for (std::int64_t j = 0; j < n; ++j) yrow[j] += av * brow[j];
    }
  }
  return y;
}

template <typename S>
TensorOf<S> transpose(const TensorOf<S>& a) {
  const std::int64_t r = a.rows(), c = a.cols();
  TensorOf<S> t = TensorOf<S>::zeros({c, r});
  S* td = t.mutable_data();
  const S* ad = a.data();
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j) td[j * r + i] = ad[i * c + j];
  return t;
}

template <typename S>
TensorOf<S> outer(const TensorOf<S>& u, const TensorOf<S>& v) {
  if (u.rank() != 1 || v.rank() != 1)
    throw ShapeError("outer: expects rank-1 inputs, got " + shape_to_string(u.shape()) + " and " +
                     shape_to_string(v.shape()));
  const std::int64_t m = u.shape()[0], n = v.shape()[0];
  TensorOf<S> y = TensorOf<S>::zeros({m, n});
  S* yd = y.mutable_data();
  const S* ud = u.data();
  const S* vd = v.data();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) yd[i * n + j] = ud[i] * vd[j];
  return y;
}

template <typename S>
TensorOf<S> relu(const TensorOf<S>& x) {
  TensorOf<S> y = x;
  S* d = y.mutable_data();
  for (std::int64_t i = 0; i < y.size(); ++i) d[i] = d[i] > S(0) ? d[i] : S(0);
  return y;
}

template <typename S>
TensorOf<S> sigmoid(const TensorOf<S>& x) {
  TensorOf<S> y = x;
  S* d = y.mutable_data();
  for (std::int64_t i = 0; i < y.size(); ++i)
    d[i] = S(1) / (S(1) + static_cast<S>(std::exp(-static_cast<double>(d[i]))));
  return y;
}

template <typename S>
TensorOf<S> add(const TensorOf<S>& a, const TensorOf<S>& b) {
  detail::require_same_shape(a, b, "add");
  TensorOf<S> y = a;
  S* d = y.mutable_data();
  const S* bd = b.data();
  for (std::int64_t i = 0; i < y.size(); ++i) d[i] += bd[i];
  return y;
}

template <typename S>
TensorOf<S> sub(const TensorOf<S>& a, const TensorOf<S>& b) {
  detail::require_same_shape(a, b, "sub");
  TensorOf<S> y = a;
  S* d = y.mutable_data();
  const S* bd = b.data();
  for (std::int64_t i = 0; i < y.size(); ++i) d[i] -= bd[i];
  return y;
}

template <typename S>
TensorOf<S> mul(const TensorOf<S>& a, const TensorOf<S>& b) {
  detail::require_same_shape(a, b, "mul");
  TensorOf<S> y = a;
  S* d = y.mutable_data();
  const S* bd = b.data();
  for (std::int64_t i = 0; i < y.size(); ++i) d[i] *= bd[i];
  return y;
}

template <typename S>
TensorOf<S> scale(const TensorOf<S>& a, S factor) {
  TensorOf<S> y = a;
  S* d = y.mutable_data();
  for (std::int64_t i = 0; i < y.size(); ++i) d[i] *= factor;
  return y;
}

template <typename S>
TensorOf<S> add_scalar(const TensorOf<S>& a, S value) {
  TensorOf<S> y = a;
  S* d = y.mutable_data();
  for (std::int64_t i = 0; i < y.size(); ++i) d[i] += value;
  return y;
}

template <typename S>
TensorOf<S> sum(const TensorOf<S>& x) {
  S acc = S(0);
  const S* d = x.data();
  for (std::int64_t i = 0; i < x.size(); ++i) acc += d[i];
  return TensorOf<S>::scalar(acc);
}

template <typename S>
TensorOf<S> mean(const TensorOf<S>& x) {
  return TensorOf<S>::scalar(sum(x).item() / static_cast<S>(x.size()));
}

template <typename S>
TensorOf<S> max_list(const std::vector<TensorOf<S>>& inputs) {
  if (inputs.empty()) throw ShapeError("max_list: empty input list");
  for (const auto& t : inputs) detail::require_same_shape(inputs.front(), t, "max_list");
  TensorOf<S> y = inputs.front();
  S* d = y.mutable_data();
  for (std::size_t k = 1; k < inputs.size(); ++k) {
    const S* in = inputs[k].data();
    for (std::int64_t i = 0; i < y.size(); ++i)
      if (in[i] > d[i]) d[i] = in[i];
  }
  return y;
}

template <typename S>
TensorOf<S> elementwise(EwKind kind, const TensorOf<S>& a, const TensorOf<S>* b) {
  const bool binary = kind == EwKind::add || kind == EwKind::sub || kind == EwKind::mul;
  if (binary && b == nullptr) throw ShapeError("elementwise: binary kind needs two operands");
  if (!binary && b != nullptr) throw ShapeError("elementwise: unary kind takes one operand");
  switch (kind) {
    case EwKind::relu: return relu(a);
    case EwKind::sigmoid: return sigmoid(a);
    case EwKind::add: return add(a, *b);
    case EwKind::sub: return sub(a, *b);
    case EwKind::mul: return mul(a, *b);
  }
  throw Error("elementwise: unknown kind");
}

template <typename S>
TensorOf<S> reduce(ReduceKind kind, const std::vector<TensorOf<S>>& inputs) {
  switch (kind) {
    case ReduceKind::sum:
      if (inputs.size() != 1) throw ShapeError("reduce sum: expects exactly one tensor");
      return sum(inputs.front());
    case ReduceKind::mean:
      if (inputs.size() != 1) throw ShapeError("reduce mean: expects exactly one tensor");
      return mean(inputs.front());
    case ReduceKind::max_elementwise_over_list: return max_list(inputs);
  }
  throw Error("reduce: unknown kind");
}

}  // namespace prise
