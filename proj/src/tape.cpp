#include "tmac/tape.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tmac/error.hpp"

namespace tmac {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Tensor& value) {
  Node n;
  n.external = &value;
  n.requires_grad = true;
  n.op = "parameter";
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.op = "constant";
  return push(std::move(n));
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.external = &value;
  n.op = "constant";
  return push(std::move(n));
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> operands,
                 BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by op '" + std::string(op) + "' " +
                       value.shape_string());
  }
  Node n;
  n.owned = std::move(value);
  n.op = op;
  for (Var v : operands) {
    if (v.tape() != this) throw Error("operand of '" + std::string(op) + "' is on another tape");
    n.operands.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external != nullptr ? *n.external : n.owned;
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    const Tensor& v = value(id);
    n.grad = Tensor(v.rows(), v.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  add_inplace(grad_slot(id), g);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw Error("backward: loss belongs to another tape");
  const Tensor& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw DimensionError("backward requires a 1x1 loss, got " + lv.shape_string());
  }
  if (backward_done_) throw Error("backward called twice on the same tape");
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_slot(loss.id())[0] = 1.0;
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  const Tensor& val = value(v.id());
  return Tensor(val.rows(), val.cols());
}

// ---------------------------------------------------------------------------
// Operations

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error("operation on an unbound Var");
  return *a.tape();
}

enum class Broadcast { none, row, col };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.same_shape(b)) return Broadcast::none;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::col;
  throw DimensionError(std::string(op) + " shape mismatch: " + a.shape_string() + " vs " +
                       b.shape_string());
}

double bval(const Tensor& b, Broadcast kind, std::size_t r, std::size_t c) {
  switch (kind) {
    case Broadcast::row: return b(0, c);
    case Broadcast::col: return b(r, 0);
    default: return b(r, c);
  }
}

// Sum a full-shape gradient down to b's broadcast shape.
Tensor reduce_to(const Tensor& g, Broadcast kind) {
  if (kind == Broadcast::none) return g;
  if (kind == Broadcast::row) {
    Tensor out(1, g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) out(0, c) += g(r, c);
    return out;
  }
  Tensor out(g.rows(), 1);
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) out(r, 0) += g(r, c);
  return out;
}

bool is_broadcast_operand(const Tensor& a, const Tensor& b) {
  return !a.same_shape(b) && ((a.rows() == 1 && a.cols() == b.cols()) ||
                              (a.cols() == 1 && a.rows() == b.rows()));
}

// Elementwise unary op where the local derivative is a function of (x, y).
template <typename F, typename D>
Var unary(std::string_view op, Var a, F f, D dfdx) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  std::size_t self = t.size();
  return t.record(op, std::move(y), {a}, [ia, self, dfdx](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(ia)) return;
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  Tensor c = tmac::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("matmul", std::move(c), {a, b}, [ia, ib](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(ia)) add_inplace(tp.grad_slot(ia), matmul_nt(g, tp.value(ib)));
    if (tp.requires_grad(ib)) add_inplace(tp.grad_slot(ib), matmul_tn(tp.value(ia), g));
  });
}

Var add(Var a, Var b) {
  if (is_broadcast_operand(a.value(), b.value())) std::swap(a, b);
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = broadcast_kind(x, y, "add");
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) + bval(y, kind, r, c);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("add", std::move(out), {a, b}, [ia, ib, kind](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, g);
    if (tp.requires_grad(ib)) tp.accumulate(ib, reduce_to(g, kind));
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = broadcast_kind(x, y, "sub");
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) - bval(y, kind, r, c);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("sub", std::move(out), {a, b}, [ia, ib, kind](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, g);
    if (tp.requires_grad(ib)) {
      Tensor gb = reduce_to(g, kind);
      for (double& v : gb.data()) v = -v;
      tp.accumulate(ib, gb);
    }
  });
}

Var mul(Var a, Var b) {
  if (is_broadcast_operand(a.value(), b.value())) std::swap(a, b);
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = broadcast_kind(x, y, "mul");
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) * bval(y, kind, r, c);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("mul", std::move(out), {a, b}, [ia, ib, kind](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_slot(ia);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) += g(r, c) * bval(yv, kind, r, c);
    }
    if (tp.requires_grad(ib)) {
      Tensor full(g.rows(), g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) full(r, c) = g(r, c) * xv(r, c);
      tp.accumulate(ib, reduce_to(full, kind));
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      "add_scalar", a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var pow(Var a, double exponent) {
  if (exponent == 0.0) {
    return unary(
        "pow", a, [](double) { return 1.0; }, [](double, double) { return 0.0; });
  }
  return unary(
      "pow", a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var sum(Var a, Axis axis) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.empty()) throw DimensionError("sum of empty tensor");
  Tensor out = axis == Axis::rows ? Tensor(x.rows(), 1)
               : axis == Axis::cols ? Tensor(1, x.cols())
                                    : Tensor(1, 1);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const std::size_t orow = axis == Axis::rows ? r : 0;
      const std::size_t ocol = axis == Axis::cols ? c : 0;
      out(orow, ocol) += x(r, c);
    }
  const std::size_t ia = a.id();
  return t.record("sum", std::move(out), {a}, [ia, axis](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_slot(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c)
        ga(r, c) += g(axis == Axis::rows ? r : 0, axis == Axis::cols ? c : 0);
  });
}

Var mean(Var a, Axis axis) {
  const Tensor& x = a.value();
  if (x.empty()) throw DimensionError("mean of empty tensor");
  const double count = axis == Axis::rows ? static_cast<double>(x.cols())
                       : axis == Axis::cols ? static_cast<double>(x.rows())
                                            : static_cast<double>(x.size());
  return scale(sum(a, axis), 1.0 / count);
}

Var max(Var a, Axis axis) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.empty()) throw DimensionError("max of empty tensor");
  const std::size_t groups = axis == Axis::rows ? x.rows() : axis == Axis::cols ? x.cols() : 1;
  std::vector<std::size_t> argmax(groups, std::numeric_limits<std::size_t>::max());
  Tensor out = axis == Axis::rows ? Tensor(x.rows(), 1)
               : axis == Axis::cols ? Tensor(1, x.cols())
                                    : Tensor(1, 1);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const std::size_t gi = axis == Axis::rows ? r : axis == Axis::cols ? c : 0;
      const std::size_t flat = r * x.cols() + c;
      if (argmax[gi] == std::numeric_limits<std::size_t>::max() || x[flat] > x[argmax[gi]]) {
        argmax[gi] = flat;
      }
    }
  for (std::size_t gi = 0; gi < groups; ++gi) out[gi] = x[argmax[gi]];
  const std::size_t ia = a.id();
  return t.record("max", std::move(out), {a},
                  [ia, argmax = std::move(argmax)](Tape& tp, const Tensor& g) {
                    Tensor& ga = tp.grad_slot(ia);
                    for (std::size_t gi = 0; gi < argmax.size(); ++gi) ga[argmax[gi]] += g[gi];
                  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  return t.record("transpose", tmac::transpose(a.value()), {a},
                  [ia](Tape& tp, const Tensor& g) { tp.accumulate(ia, tmac::transpose(g)); });
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rows() != y.rows()) {
    throw DimensionError("concat_cols row mismatch: " + x.shape_string() + " | " +
                         y.shape_string());
  }
  const std::size_t ca = x.cols(), cb = y.cols();
  Tensor out(x.rows(), ca + cb);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < ca; ++c) out(r, c) = x(r, c);
    for (std::size_t c = 0; c < cb; ++c) out(r, ca + c) = y(r, c);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("concat_cols", std::move(out), {a, b},
                  [ia, ib, ca, cb](Tape& tp, const Tensor& g) {
                    if (tp.requires_grad(ia)) {
                      Tensor& ga = tp.grad_slot(ia);
                      for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < ca; ++c) ga(r, c) += g(r, c);
                    }
                    if (tp.requires_grad(ib)) {
                      Tensor& gb = tp.grad_slot(ib);
                      for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < cb; ++c) gb(r, c) += g(r, ca + c);
                    }
                  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (begin + count > x.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         x.shape_string());
  }
  Tensor out(count, x.cols());
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(begin + r, c);
  const std::size_t ia = a.id();
  return t.record("slice_rows", std::move(out), {a}, [ia, begin](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_slot(ia);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(begin + r, c) += g(r, c);
  });
}

Var outer_sum(Var col, Var row) {
  Tape& t = tape_of(col);
  const Tensor& x = col.value();
  const Tensor& y = row.value();
  if (x.cols() != 1 || y.rows() != 1) {
    throw DimensionError("outer_sum expects (n x 1) and (1 x m), got " + x.shape_string() +
                         " and " + y.shape_string());
  }
  Tensor out(x.rows(), y.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) out(r, c) = x(r, 0) + y(0, c);
  const std::size_t ia = col.id(), ib = row.id();
  return t.record("outer_sum", std::move(out), {col, row}, [ia, ib](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(ia)) tp.accumulate(ia, reduce_to(g, Broadcast::col));
    if (tp.requires_grad(ib)) tp.accumulate(ib, reduce_to(g, Broadcast::row));
  });
}

Var masked_softmax_rows(Var logits, const Tensor& mask) {
  Tape& t = tape_of(logits);
  const Tensor& x = logits.value();
  if (!x.same_shape(mask)) {
    throw DimensionError("masked_softmax_rows mask " + mask.shape_string() + " vs logits " +
                         x.shape_string());
  }
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < x.cols(); ++c)
      if (mask(r, c) != 0.0) peak = std::max(peak, x(r, c));
    if (peak == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (mask(r, c) == 0.0) continue;
      out(r, c) = std::exp(x(r, c) - peak);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) /= total;
  }
  const std::size_t ia = logits.id();
  const std::size_t self = t.size();
  return t.record("masked_softmax_rows", std::move(out), {logits},
                  [ia, self](Tape& tp, const Tensor& g) {
                    const Tensor& y = tp.value(self);
                    Tensor& ga = tp.grad_slot(ia);
                    for (std::size_t r = 0; r < y.rows(); ++r) {
                      double dot = 0.0;
                      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
                      for (std::size_t c = 0; c < y.cols(); ++c)
                        ga(r, c) += y(r, c) * (g(r, c) - dot);
                    }
                  });
}

}  // namespace tmac
