#include "prise/autograd.hpp"

#include <algorithm>
#include <cmath>

namespace prise {

const Tensor& Value::value() const { return tape->node_value(id); }
const Shape& Value::shape() const { return value().shape(); }

namespace {

Tape* common_tape(std::initializer_list<Value> vs) {
  Tape* t = nullptr;
  for (const Value& v : vs) {
    if (!v.valid()) throw Error("autograd: op received an invalid value handle");
    if (t == nullptr) t = v.tape;
    if (v.tape != t) throw Error("autograd: values belong to different tapes");
  }
  return t;
}

}  // namespace

Value record_op(Tape& tape, Tensor out, bool requires_grad,
                std::function<void(const Tensor&)> backprop) {
  Tape::Node node;
  node.value = std::move(out);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backprop = std::move(backprop);
  tape.nodes_.push_back(std::move(node));
  return Value{&tape, tape.node_count() - 1};
}

Value Tape::parameter(Tensor value) {
  return record_op(*this, std::move(value), true, nullptr);
}

Value Tape::constant(Tensor value) {
  return record_op(*this, std::move(value), false, nullptr);
}

void Tape::accumulate(std::int64_t id, const Tensor& adjoint) {
  const std::size_t i = static_cast<std::size_t>(id);
  if (!nodes_[i].value.same_shape(adjoint))
    throw ShapeError("accumulate: adjoint shape " + shape_to_string(adjoint.shape()) +
                     " does not match node shape " + shape_to_string(nodes_[i].value.shape()));
  if (has_adjoint_[i]) {
    adjoints_[i] = prise::add(adjoints_[i], adjoint);
  } else {
    adjoints_[i] = adjoint;
    has_adjoint_[i] = 1;
  }
}

void Tape::backward(Value loss) {
  if (loss.tape != this) throw Error("backward: loss lives on a different tape");
  if (loss.value().size() != 1)
    throw ShapeError("backward: loss has shape " + shape_to_string(loss.shape()) +
                     ", expected a single element");
  adjoints_.assign(nodes_.size(), Tensor());
  has_adjoint_.assign(nodes_.size(), 0);
  visit_order_.clear();
  Tensor seed = Tensor::full(loss.shape(), 1.0);
  accumulate(loss.id, seed);
  for (std::int64_t id = loss.id; id >= 0; --id) {
    const std::size_t i = static_cast<std::size_t>(id);
    if (!has_adjoint_[i] || !nodes_[i].backprop) continue;
    visit_order_.push_back(id);
    nodes_[i].backprop(adjoints_[i]);
  }
}

Tensor Tape::gradient(Value v) const {
  if (v.tape != this) throw Error("gradient: value lives on a different tape");
  const std::size_t i = static_cast<std::size_t>(v.id);
  if (i < has_adjoint_.size() && has_adjoint_[i]) return adjoints_[i];
  return Tensor::zeros(v.shape());
}

void Tape::reset() {
  nodes_.clear();
  adjoints_.clear();
  has_adjoint_.clear();
  visit_order_.clear();
}

// ---------------------------------------------------------------------------

Value matmul(Value a, Value b) {
  Tape* t = common_tape({a, b});
  Tensor out = matmul(a.value(), b.value());
  const bool rg = t->requires_grad(a.id) || t->requires_grad(b.id);
  Tensor av = a.value();
  Tensor bv = b.value();
  auto back = [t, a, b, av, bv](const Tensor& g) {
    if (bv.rank() == 1) {
      if (t->requires_grad(a.id)) t->accumulate(a.id, outer(g, bv));
      if (t->requires_grad(b.id)) t->accumulate(b.id, matmul(transpose(av), g));
    } else {
      if (t->requires_grad(a.id)) t->accumulate(a.id, matmul(g, transpose(bv)));
      if (t->requires_grad(b.id)) t->accumulate(b.id, matmul(transpose(av), g));
    }
  };
  return record_op(*t, std::move(out), rg, back);
}

Value add(Value a, Value b) {
  Tape* t = common_tape({a, b});
  Tensor out = add(a.value(), b.value());
  const bool rg = t->requires_grad(a.id) || t->requires_grad(b.id);
  auto back = [t, a, b](const Tensor& g) {
    if (t->requires_grad(a.id)) t->accumulate(a.id, g);
    if (t->requires_grad(b.id)) t->accumulate(b.id, g);
  };
  return record_op(*t, std::move(out), rg, back);
}

Value sub(Value a, Value b) {
  Tape* t = common_tape({a, b});
  Tensor out = sub(a.value(), b.value());
  const bool rg = t->requires_grad(a.id) || t->requires_grad(b.id);
  auto back = [t, a, b](const Tensor& g) {
    if (t->requires_grad(a.id)) t->accumulate(a.id, g);
    if (t->requires_grad(b.id)) t->accumulate(b.id, scale(g, -1.0));
  };
  return record_op(*t, std::move(out), rg, back);
}

Value mul(Value a, Value b) {
  Tape* t = common_tape({a, b});
  Tensor out = mul(a.value(), b.value());
  const bool rg = t->requires_grad(a.id) || t->requires_grad(b.id);
  Tensor av = a.value();
  Tensor bv = b.value();
  auto back = [t, a, b, av, bv](const Tensor& g) {
    if (t->requires_grad(a.id)) t->accumulate(a.id, mul(g, bv));
    if (t->requires_grad(b.id)) t->accumulate(b.id, mul(g, av));
  };
  return record_op(*t, std::move(out), rg, back);
}

Value add_scalar(Value a, double c) {
  Tape* t = common_tape({a});
  Tensor out = add_scalar(a.value(), c);
  auto back = [t, a](const Tensor& g) { t->accumulate(a.id, g); };
  return record_op(*t, std::move(out), t->requires_grad(a.id), back);
}

Value scale(Value a, double c) {
  Tape* t = common_tape({a});
  Tensor out = scale(a.value(), c);
  auto back = [t, a, c](const Tensor& g) { t->accumulate(a.id, scale(g, c)); };
  return record_op(*t, std::move(out), t->requires_grad(a.id), back);
}

Value relu(Value a) {
  Tape* t = common_tape({a});
  Tensor av = a.value();
  Tensor out = relu(av);
  auto back = [t, a, av](const Tensor& g) {
    Tensor dx = g;
    double* d = dx.mutable_data();
    const double* x = av.data();
    for (std::int64_t i = 0; i < dx.size(); ++i)
      if (x[i] <= 0.0) d[i] = 0.0;
    t->accumulate(a.id, dx);
  };
  return record_op(*t, std::move(out), t->requires_grad(a.id), back);
}

Value sigmoid(Value a) {
  Tape* t = common_tape({a});
  Tensor out = sigmoid(a.value());
  Tensor y = out;
  auto back = [t, a, y](const Tensor& g) {
    Tensor dx = g;
    double* d = dx.mutable_data();
    const double* yd = y.data();
    for (std::int64_t i = 0; i < dx.size(); ++i) d[i] *= yd[i] * (1.0 - yd[i]);
    t->accumulate(a.id, dx);
  };
  return record_op(*t, std::move(out), t->requires_grad(a.id), back);
}

Value log(Value a) {
  Tape* t = common_tape({a});
  Tensor av = a.value();
  Tensor out = av;
  {
    double* d = out.mutable_data();
    for (std::int64_t i = 0; i < out.size(); ++i) d[i] = std::log(d[i]);
  }
  auto back = [t, a, av](const Tensor& g) {
    Tensor dx = g;
    double* d = dx.mutable_data();
    const double* x = av.data();
    for (std::int64_t i = 0; i < dx.size(); ++i) d[i] /= x[i];
    t->accumulate(a.id, dx);
  };
  return record_op(*t, std::move(out), t->requires_grad(a.id), back);
}

Value clamp(Value a, double lo, double hi) {
  if (!(lo <= hi)) throw Error("clamp: lo must not exceed hi");
  Tape* t = common_tape({a});
  Tensor av = a.value();
  Tensor out = av;
  {
    double* d = out.mutable_data();
    for (std::int64_t i = 0; i < out.size(); ++i) d[i] = std::min(std::max(d[i], lo), hi);
  }
  auto back = [t, a, av, lo, hi](const Tensor& g) {
    Tensor dx = g;
    double* d = dx.mutable_data();
    const double* x = av.data();
    for (std::int64_t i = 0; i < dx.size(); ++i)
      if (x[i] < lo || x[i] > hi) d[i] = 0.0;
    t->accumulate(a.id, dx);
  };
  return record_op(*t, std::move(out), t->requires_grad(a.id), back);
}

Value sum(Value a) {
  Tape* t = common_tape({a});
  Tensor out = sum(a.value());
  Shape in_shape = a.shape();
  auto back = [t, a, in_shape](const Tensor& g) {
    t->accumulate(a.id, Tensor::full(in_shape, g.item()));
  };
  return record_op(*t, std::move(out), t->requires_grad(a.id), back);
}

Value mean(Value a) {
  Tape* t = common_tape({a});
  Tensor out = mean(a.value());
  Shape in_shape = a.shape();
  const double inv_n = 1.0 / static_cast<double>(a.value().size());
  auto back = [t, a, in_shape, inv_n](const Tensor& g) {
    t->accumulate(a.id, Tensor::full(in_shape, g.item() * inv_n));
  };
  return record_op(*t, std::move(out), t->requires_grad(a.id), back);
}

Value max_list(const std::vector<Value>& inputs) {
  if (inputs.empty()) throw ShapeError("max_list: empty input list");
  Tape* t = inputs.front().tape;
  bool rg = false;
  std::vector<Tensor> vals;
  vals.reserve(inputs.size());
  for (const Value& v : inputs) {
    common_tape({inputs.front(), v});
    vals.push_back(v.value());
    rg = rg || t->requires_grad(v.id);
  }
  Tensor out = max_list(vals);
  // Ties go to the earliest input, so gradient routing is deterministic.
  const std::int64_t n = out.size();
  std::vector<std::int32_t> winner(static_cast<std::size_t>(n), 0);
  for (std::size_t k = 1; k < vals.size(); ++k) {
    const double* in = vals[k].data();
    for (std::int64_t i = 0; i < n; ++i)
      if (in[i] > vals[static_cast<std::size_t>(winner[static_cast<std::size_t>(i)])].data()[i])
        winner[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(k);
  }
  std::vector<Value> ins = inputs;
  auto back = [t, ins, winner](const Tensor& g) {
    for (std::size_t k = 0; k < ins.size(); ++k) {
      if (!t->requires_grad(ins[k].id)) continue;
      Tensor dx = Tensor::zeros(g.shape());
      double* d = dx.mutable_data();
      const double* gd = g.data();
      bool any = false;
      for (std::int64_t i = 0; i < g.size(); ++i) {
        if (winner[static_cast<std::size_t>(i)] == static_cast<std::int32_t>(k)) {
          d[i] = gd[i];
          any = true;
        }
      }
      if (any) t->accumulate(ins[k].id, dx);
    }
  };
  return record_op(*t, std::move(out), rg, back);
}

Value concat(const std::vector<Value>& inputs) {
  if (inputs.empty()) throw ShapeError("concat: empty input list");
  Tape* t = inputs.front().tape;
  bool rg = false;
  std::vector<std::int64_t> offsets;
  std::vector<double> out_data;
  for (const Value& v : inputs) {
    common_tape({inputs.front(), v});
    if (v.value().rank() > 1)
      throw ShapeError("concat: input of shape " + shape_to_string(v.shape()) +
                       " is not rank-0 or rank-1");
    offsets.push_back(static_cast<std::int64_t>(out_data.size()));
    const double* d = v.value().data();
    out_data.insert(out_data.end(), d, d + v.value().size());
    rg = rg || t->requires_grad(v.id);
  }
  offsets.push_back(static_cast<std::int64_t>(out_data.size()));
  Tensor out = Tensor::from_vector(std::move(out_data));
  std::vector<Value> ins = inputs;
  auto back = [t, ins, offsets](const Tensor& g) {
    const double* gd = g.data();
    for (std::size_t k = 0; k < ins.size(); ++k) {
      if (!t->requires_grad(ins[k].id)) continue;
      Tensor dx = Tensor::zeros(ins[k].shape());
      double* d = dx.mutable_data();
      const std::int64_t len = offsets[k + 1] - offsets[k];
      for (std::int64_t i = 0; i < len; ++i) d[i] = gd[offsets[k] + i];
      t->accumulate(ins[k].id, dx);
    }
  };
  return record_op(*t, std::move(out), rg, back);
}

Value select(Value a, std::int64_t index) {
  Tape* t = common_tape({a});
  if (a.value().rank() != 1)
    throw ShapeError("select: expects a rank-1 tensor, got " + shape_to_string(a.shape()));
  if (index < 0 || index >= a.value().size())
    throw ShapeError("select: index " + std::to_string(index) + " out of range for shape " +
                     shape_to_string(a.shape()));
  Tensor out = Tensor::scalar(a.value()[index]);
  Shape in_shape = a.shape();
  auto back = [t, a, index, in_shape](const Tensor& g) {
    Tensor dx = Tensor::zeros(in_shape);
    dx.mutable_data()[index] = g.item();
    t->accumulate(a.id, dx);
  };
  return record_op(*t, std::move(out), t->requires_grad(a.id), back);
}

Value log_softmax(Value a) {
  Tape* t = common_tape({a});
  if (a.value().rank() != 1)
    throw ShapeError("log_softmax: expects a rank-1 tensor, got " + shape_to_string(a.shape()));
  const Tensor& av = a.value();
  std::vector<double> p = softmax(av.to_vector());
  Tensor out = av;
  {
    double* d = out.mutable_data();
    const double* x = av.data();
    double hi = x[0];
    for (std::int64_t i = 1; i < av.size(); ++i) hi = std::max(hi, x[i]);
    double z = 0.0;
    for (std::int64_t i = 0; i < av.size(); ++i) z += std::exp(x[i] - hi);
    const double lse = hi + std::log(z);
    for (std::int64_t i = 0; i < av.size(); ++i) d[i] = x[i] - lse;
  }
  auto back = [t, a, p](const Tensor& g) {
    const double* gd = g.data();
    double gsum = 0.0;
    for (std::int64_t i = 0; i < g.size(); ++i) gsum += gd[i];
    Tensor dx = g;
    double* d = dx.mutable_data();
    for (std::int64_t i = 0; i < dx.size(); ++i)
      d[i] -= p[static_cast<std::size_t>(i)] * gsum;
    t->accumulate(a.id, dx);
  };
  return record_op(*t, std::move(out), t->requires_grad(a.id), back);
}

Value dot(Value a, Value b) {
  Tape* t = common_tape({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 1 || bv.rank() != 1 || av.size() != bv.size())
    throw ShapeError("dot: expects equal-length rank-1 tensors, got " +
                     shape_to_string(av.shape()) + " and " + shape_to_string(bv.shape()));
  double acc = 0.0;
  for (std::int64_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  const bool rg = t->requires_grad(a.id) || t->requires_grad(b.id);
  Tensor ac = av;
  Tensor bc = bv;
  auto back = [t, a, b, ac, bc](const Tensor& g) {
    const double gv = g.item();
    if (t->requires_grad(a.id)) t->accumulate(a.id, scale(bc, gv));
    if (t->requires_grad(b.id)) t->accumulate(b.id, scale(ac, gv));
  };
  return record_op(*t, Tensor::scalar(acc), rg, back);
}

Value affine(Value w, Value x, Value b) { return add(matmul(w, x), b); }

Value elementwise(EwKind kind, Value a) {
  switch (kind) {
    case EwKind::relu: return relu(a);
    case EwKind::sigmoid: return sigmoid(a);
    default: throw Error("elementwise: kind needs two operands");
  }
}

Value elementwise(EwKind kind, Value a, Value b) {
  switch (kind) {
    case EwKind::add: return add(a, b);
    case EwKind::sub: return sub(a, b);
    case EwKind::mul: return mul(a, b);
    default: throw Error("elementwise: kind takes one operand");
  }
}

Value reduce(ReduceKind kind, const std::vector<Value>& inputs) {
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
