#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "prise/tensor.hpp"

namespace prise {

class Tape;

/// Handle to a node on a tape. Cheap to copy; invalidated when the tape
/// is reset.
struct Value {
  Tape* tape = nullptr;
  std::int64_t id = -1;

  const Tensor& value() const;
  const Shape& shape() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Reverse-mode tape. Every op records its output value plus a closure
/// that pushes the output adjoint back onto the inputs. backward walks
/// node ids in strictly descending order, which is exactly the reverse
/// of execution order because ids are assigned sequentially.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value parameter(Tensor value);
  Value constant(Tensor value);

  std::int64_t node_count() const { return static_cast<std::int64_t>(nodes_.size()); }
  const Tensor& node_value(std::int64_t id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(std::int64_t id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Seeds the adjoint of `loss` (which must hold exactly one element)
  /// with 1 and propagates. May be called repeatedly; each call clears
  /// previous adjoints first.
  void backward(Value loss);

  /// Adjoint accumulated for `v` by the latest backward; zeros if the
  /// value never received gradient.
  Tensor gradient(Value v) const;

  /// Ids whose closures ran during the latest backward, in visit order.
  const std::vector<std::int64_t>& last_visit_order() const { return visit_order_; }

  /// Drops all nodes and adjoints; outstanding Values become invalid.
  void reset();

  // Used by op closures; also handy when composing custom ops.
  void accumulate(std::int64_t id, const Tensor& adjoint);

 private:
  friend struct Value;
  friend Value record_op(Tape& tape, Tensor out, bool requires_grad,
                         std::function<void(const Tensor&)> backprop);

  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::function<void(const Tensor&)> backprop;  // empty for leaves
  };

  std::vector<Node> nodes_;
  std::vector<Tensor> adjoints_;
  std::vector<char> has_adjoint_;
  std::vector<std::int64_t> visit_order_;
};

// Ops. All inputs must live on one tape; mixing tapes throws Error.
Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value add_scalar(Value a, double c);
Value scale(Value a, double c);
Value relu(Value a);
Value sigmoid(Value a);
Value log(Value a);
Value clamp(Value a, double lo, double hi);
Value sum(Value a);
Value mean(Value a);
Value max_list(const std::vector<Value>& inputs);
Value concat(const std::vector<Value>& inputs);
Value select(Value a, std::int64_t index);
Value log_softmax(Value a);
Value dot(Value a, Value b);
/// matmul(w, x) + b with a rank-1 x and b.
Value affine(Value w, Value x, Value b);

Value elementwise(EwKind kind, Value a);
Value elementwise(EwKind kind, Value a, Value b);
Value reduce(ReduceKind kind, const std::vector<Value>& inputs);

}  // namespace prise
