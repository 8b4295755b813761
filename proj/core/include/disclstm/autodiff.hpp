#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "disclstm/tensor.hpp"

namespace disclstm::ad {

class Tape;

enum class Op : std::uint8_t {
  kLeaf,
  kMatmul,
  kAdd,
  kConcat,
  kHadamard,
  kSigmoid,
  kTanh,
  kMean,
  kRow,
  kSoftmaxMasked,
  kCrossEntropy,
};

const char* op_name(Op op) noexcept;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while
/// the owning tape is alive.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Convenience for 1x1 values.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Records the forward computation in topological order and replays it in
/// reverse to accumulate gradients. One tape per worker; values and grads
/// never leave it except through copies.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf owning its value that receives a gradient.
  Var variable(Tensor value);
  /// Leaf borrowing `value`, which must outlive the tape. Receives a gradient.
  Var parameter(const Tensor& value);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward root w.r.t. `v`; zeros if `v` does not
  /// influence it.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;

  /// Populates gradients of every node reachable from the scalar `loss`.
  /// Calling it again without reset_grads() is an error.
  void backward(Var loss);
  void reset_grads();

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Scales the gradient emitted by one backward rule. Only meant for
  /// negative-control tests of the gradient checker.
  void inject_backward_fault(Op op, double scale) {
    fault_op_ = op;
    fault_scale_ = scale;
  }

 private:
  struct Node {
    Op op = Op::kLeaf;
    bool requires_grad = false;
    std::uint32_t lhs = 0;
    std::uint32_t rhs = 0;
    std::vector<std::uint32_t> inputs;  // n-ary ops (concat)
    std::vector<std::size_t> indices;   // row / active set / label
    Tensor value;
    const Tensor* borrowed = nullptr;
    mutable Tensor grad;  // materialized lazily
  };

  friend Var matmul(Var, Var);
  friend Var add(Var, Var);
  friend Var concat(std::span<const Var>);
  friend Var hadamard(Var, Var);
  friend Var sigmoid(Var);
  friend Var tanh(Var);
  friend Var mean(Var);
  friend Var row(Var, std::size_t);
  friend Var softmax_masked(Var, std::span<const std::size_t>);
  friend Var cross_entropy(Var, std::size_t);

  Var push(Node node, const char* what);
  const Tensor& node_value(const Node& n) const { return n.borrowed ? *n.borrowed : n.value; }
  Tensor& grad_slot(std::uint32_t id);
  void backprop_node(std::uint32_t id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  Op fault_op_ = Op::kLeaf;
  double fault_scale_ = 1.0;
};

/// Matrix product (r x k) * (k x c).
Var matmul(Var a, Var b);
/// Elementwise sum of equal shapes.
Var add(Var a, Var b);
/// Vertical stacking of operands with equal column counts.
Var concat(std::span<const Var> parts);
Var concat(Var a, Var b);
/// Elementwise product.
Var hadamard(Var a, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
/// Mean of all entries, as a 1x1 value.
Var mean(Var a);
/// Row `r` of a matrix as a column vector (cols x 1). For a column vector
/// this selects a single entry (1 x 1).
Var row(Var m, std::size_t r);
/// Softmax over the entries of the column vector `scores` listed in
/// `active`. The result has one entry per active index, in the order given.
/// Throws UsageError if `active` is empty.
Var softmax_masked(Var scores, std::span<const std::size_t> active);
/// Negative log-softmax of `logits` (column vector) at `label`, as 1x1.
Var cross_entropy(Var logits, std::size_t label);

/// Numerically stable scalar helpers shared with the plain-value oracles.
double stable_sigmoid(double x) noexcept;
std::vector<double> softmax(std::span<const double> scores);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

/// Evaluates the objective at `params`. When `grads` is non-null it must
/// also write the analytic gradient for every tensor (same shapes).
using Objective =
    std::function<double(std::span<const Tensor> params, std::vector<Tensor>* grads)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares analytic gradients with central differences
/// (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate. The error of a
/// coordinate is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const Objective& f, std::vector<Tensor> params, double eps);

}  // namespace disclstm::ad
