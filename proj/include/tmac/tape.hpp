#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "tmac/tensor.hpp"

namespace tmac {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run record of one forward computation.
///
/// Nodes are appended in evaluation order, so every operand of node k has an
/// index below k and a single reverse sweep computes all adjoints. A tape is
/// meant for exactly one forward/backward pass and is not thread-safe; run
/// independent graphs on independent tapes.
class Tape {
 public:
  /// Receives the adjoint of the node being processed and pushes contributions
  /// to its operands through `Tape::accumulate`.
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient. The tensor is referenced, not copied, and
  /// must outlive the tape.
  Var parameter(const Tensor& value);
  /// Owned leaf without gradient.
  Var constant(Tensor value);
  /// Referenced leaf without gradient; `value` must outlive the tape.
  Var constant_ref(const Tensor& value);

  /// Appends an operation node. Throws NumericError naming `op` if `value`
  /// contains NaN or Inf.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> operands,
             BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id()); }
  const std::vector<std::size_t>& operands(std::size_t id) const { return nodes_[id].operands; }
  std::string_view op_name(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Adds `g` into the adjoint of node `id`; ignored for nodes without gradient.
  void accumulate(std::size_t id, const Tensor& g);
  /// Mutable adjoint slot (zero-initialized on first use) for in-place accumulation.
  Tensor& grad_slot(std::size_t id);

  /// Reverse sweep from a 1x1 loss. May be called once per tape.
  void backward(Var loss);

  /// Adjoint of `v` after backward(); zeros of v's shape when v is unreachable.
  Tensor grad(Var v) const;

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> operands;
    BackwardFn backward;
    std::string_view op;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

enum class Axis {
  rows,  ///< reduce within each row: (n x m) -> (n x 1)
  cols,  ///< reduce within each column: (n x m) -> (1 x m)
  all,   ///< (n x m) -> (1 x 1)
};

// Differentiable operations. Binary elementwise ops accept equal shapes, or a
// second operand that is a (1 x m) row or (n x 1) column vector broadcast
// across the first.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var pow(Var a, double exponent);
/// Clamps to [lo, hi]; gradient is zero where the input was clamped.
Var clamp(Var a, double lo, double hi);

Var sum(Var a, Axis axis = Axis::all);
Var mean(Var a, Axis axis = Axis::all);
/// Gradient routes to the first maximal entry of each reduced group.
Var max(Var a, Axis axis = Axis::all);

Var transpose(Var a);
/// [a | b] along columns; row counts must match.
Var concat_cols(Var a, Var b);
/// Rows [begin, begin + count) of a.
Var slice_rows(Var a, std::size_t begin, std::size_t count);
/// out(i, j) = col(i) + row(j) for an (n x 1) column and (1 x m) row.
Var outer_sum(Var col, Var row);
/// Row-wise softmax over entries where mask != 0. Fully masked rows produce
/// all-zero output rows.
Var masked_softmax_rows(Var logits, const Tensor& mask);

}  // namespace tmac
