#include "disclstm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "disclstm/error.hpp"

namespace disclstm::ad {

namespace {

Tape& common_tape(Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw UsageError("operands belong to different tapes");
  }
  return a.tape();
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                   b.shape_string());
}

}  // namespace

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kConcat: return "concat";
    case Op::kHadamard: return "hadamard";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kMean: return "mean";
    case Op::kRow: return "row";
    case Op::kSoftmaxMasked: return "softmax_masked";
    case Op::kCrossEntropy: return "cross_entropy";
  }
  return "?";
}

double stable_sigmoid(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    out[k] = std::exp(scores[k] - top);
    total += out[k];
  }
  for (double& v : out) v /= total;
  return out;
}

// ---------------------------------------------------------------------------
// Var

const Tensor& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ShapeError("scalar(): value is " + v.shape_string());
  return v[0];
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Node node, const char* what) {
  if (!node_value(node).all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + what);
  }
  if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw UsageError("tape is full");
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n), "constant leaf");
}

Var Tape::variable(Tensor value) {
  Node n;
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n), "variable leaf");
}

Var Tape::parameter(const Tensor& value) {
  Node n;
  n.requires_grad = true;
  n.borrowed = &value;
  return push(std::move(n), "parameter leaf");
}

const Tensor& Tape::value(Var v) const { return node_value(nodes_.at(v.id())); }

bool Tape::requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty() && !node_value(n).empty()) {
    n.grad = Tensor::zeros_like(node_value(n));
  }
  return n.grad;
}

Tensor& Tape::grad_slot(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros_like(node_value(n));
  return n.grad;
}

void Tape::reset_grads() {
  for (Node& n : nodes_) n.grad = Tensor();
  backward_done_ = false;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw UsageError("backward: loss belongs to another tape");
  if (backward_done_) throw UsageError("backward called twice without reset_grads()");
  const Tensor& root = value(loss);
  if (root.size() != 1) throw ShapeError("backward: loss must be scalar, got " + root.shape_string());
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_slot(loss.id())[0] = 1.0;
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.op == Op::kLeaf || !n.requires_grad || n.grad.empty()) continue;
    backprop_node(id);
  }
}

void Tape::backprop_node(std::uint32_t id) {
  // grad_slot() never grows nodes_, so these references stay valid.
  const Op op = nodes_[id].op;
  const double fault = (op == fault_op_) ? fault_scale_ : 1.0;
  const Tensor& g = nodes_[id].grad;
  const Tensor& y = node_value(nodes_[id]);
  const std::uint32_t lhs = nodes_[id].lhs;
  const std::uint32_t rhs = nodes_[id].rhs;

  switch (op) {
    case Op::kLeaf:
      break;
    case Op::kMatmul: {
      const Tensor& a = node_value(nodes_[lhs]);
      const Tensor& b = node_value(nodes_[rhs]);
      const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
      if (nodes_[lhs].requires_grad) {
        Tensor& ga = grad_slot(lhs);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const double gij = g(i, j) * fault;
            if (gij == 0.0) continue;
            for (std::size_t t = 0; t < k; ++t) ga(i, t) += gij * b(t, j);
          }
        }
      }
      if (nodes_[rhs].requires_grad) {
        Tensor& gb = grad_slot(rhs);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t t = 0; t < k; ++t) {
            const double ait = a(i, t) * fault;
            if (ait == 0.0) continue;
            for (std::size_t j = 0; j < c; ++j) gb(t, j) += ait * g(i, j);
          }
        }
      }
      break;
    }
    case Op::kAdd: {
      for (std::uint32_t parent : {lhs, rhs}) {
        if (!nodes_[parent].requires_grad) continue;
        Tensor& gp = grad_slot(parent);
        for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * fault;
      }
      break;
    }
    case Op::kConcat: {
      std::size_t offset = 0;
      const std::vector<std::uint32_t> inputs = nodes_[id].inputs;
      for (std::uint32_t parent : inputs) {
        const std::size_t len = node_value(nodes_[parent]).size();
        if (nodes_[parent].requires_grad) {
          Tensor& gp = grad_slot(parent);
          for (std::size_t i = 0; i < len; ++i) gp[i] += g[offset + i] * fault;
        }
        offset += len;
      }
      break;
    }
    case Op::kHadamard: {
      const Tensor& a = node_value(nodes_[lhs]);
      const Tensor& b = node_value(nodes_[rhs]);
      if (nodes_[lhs].requires_grad) {
        Tensor& ga = grad_slot(lhs);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i] * fault;
      }
      if (nodes_[rhs].requires_grad) {
        Tensor& gb = grad_slot(rhs);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i] * fault;
      }
      break;
    }
    case Op::kSigmoid: {
      if (!nodes_[lhs].requires_grad) break;
      Tensor& ga = grad_slot(lhs);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]) * fault;
      break;
    }
    case Op::kTanh: {
      if (!nodes_[lhs].requires_grad) break;
      Tensor& ga = grad_slot(lhs);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]) * fault;
      break;
    }
    case Op::kMean: {
      if (!nodes_[lhs].requires_grad) break;
      Tensor& ga = grad_slot(lhs);
      const double share = g[0] * fault / static_cast<double>(ga.size());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += share;
      break;
    }
    case Op::kRow: {
      if (!nodes_[lhs].requires_grad) break;
      Tensor& ga = grad_slot(lhs);
      const std::size_t r = nodes_[id].indices[0];
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(r, j) += g[j] * fault;
      break;
    }
    case Op::kSoftmaxMasked: {
      if (!nodes_[lhs].requires_grad) break;
      const std::vector<std::size_t> active = nodes_[id].indices;
      double dot = 0.0;
      for (std::size_t k = 0; k < active.size(); ++k) dot += y[k] * g[k];
      Tensor& ga = grad_slot(lhs);
      for (std::size_t k = 0; k < active.size(); ++k) {
        ga[active[k]] += y[k] * (g[k] - dot) * fault;
      }
      break;
    }
    case Op::kCrossEntropy: {
      if (!nodes_[lhs].requires_grad) break;
      const Tensor& z = node_value(nodes_[lhs]);
      const std::size_t label = nodes_[id].indices[0];
      const std::vector<double> p = softmax(z.data());
      Tensor& ga = grad_slot(lhs);
      for (std::size_t k = 0; k < p.size(); ++k) {
        ga[k] += g[0] * (p[k] - (k == label ? 1.0 : 0.0)) * fault;
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Primitive ops

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.cols() != w.rows()) shape_mismatch("matmul", x, w);
  Tensor out(x.rows(), w.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double xik = x(i, k);
      if (xik == 0.0) continue;
      for (std::size_t j = 0; j < w.cols(); ++j) out(i, j) += xik * w(k, j);
    }
  }
  Tape::Node n;
  n.op = Op::kMatmul;
  n.lhs = a.id();
  n.rhs = b.id();
  n.requires_grad = t.requires_grad(a) || t.requires_grad(b);
  n.value = std::move(out);
  return t.push(std::move(n), "matmul");
}

Var add(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_mismatch("add", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  Tape::Node n;
  n.op = Op::kAdd;
  n.lhs = a.id();
  n.rhs = b.id();
  n.requires_grad = t.requires_grad(a) || t.requires_grad(b);
  n.value = std::move(out);
  return t.push(std::move(n), "add");
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat: no operands");
  Tape& t = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  Tape::Node n;
  n.op = Op::kConcat;
  for (const Var& p : parts) {
    common_tape(parts.front(), p);
    if (p.cols() != cols) shape_mismatch("concat", parts.front().value(), p.value());
    rows += p.rows();
    n.inputs.push_back(p.id());
    n.requires_grad = n.requires_grad || t.requires_grad(p);
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const Var& p : parts) {
    const auto src = p.value().data();
    data.insert(data.end(), src.begin(), src.end());
  }
  n.value = Tensor(rows, cols, std::move(data));
  return t.push(std::move(n), "concat");
}

Var concat(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat(parts);
}

Var hadamard(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_mismatch("hadamard", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  Tape::Node n;
  n.op = Op::kHadamard;
  n.lhs = a.id();
  n.rhs = b.id();
  n.requires_grad = t.requires_grad(a) || t.requires_grad(b);
  n.value = std::move(out);
  return t.push(std::move(n), "hadamard");
}

Var sigmoid(Var a) {
  Tape& t = a.tape();
  Tensor out = a.value();
  for (double& v : out.data()) v = stable_sigmoid(v);
  Tape::Node n;
  n.op = Op::kSigmoid;
  n.lhs = a.id();
  n.requires_grad = t.requires_grad(a);
  n.value = std::move(out);
  return t.push(std::move(n), "sigmoid");
}

Var tanh(Var a) {
  Tape& t = a.tape();
  Tensor out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  Tape::Node n;
  n.op = Op::kTanh;
  n.lhs = a.id();
  n.requires_grad = t.requires_grad(a);
  n.value = std::move(out);
  return t.push(std::move(n), "tanh");
}

Var mean(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  if (x.empty()) throw ShapeError("mean: empty operand");
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tape::Node n;
  n.op = Op::kMean;
  n.lhs = a.id();
  n.requires_grad = t.requires_grad(a);
  n.value = Tensor(1, 1, total / static_cast<double>(x.size()));
  return t.push(std::move(n), "mean");
}

Var row(Var m, std::size_t r) {
  Tape& t = m.tape();
  const Tensor& x = m.value();
  if (r >= x.rows()) {
    throw ShapeError("row: index " + std::to_string(r) + " out of range for " + x.shape_string());
  }
  const auto src = x.row(r);
  Tape::Node n;
  n.op = Op::kRow;
  n.lhs = m.id();
  n.indices = {r};
  n.requires_grad = t.requires_grad(m);
  n.value = Tensor(src.size(), 1, std::vector<double>(src.begin(), src.end()));
  return t.push(std::move(n), "row");
}

Var softmax_masked(Var scores, std::span<const std::size_t> active) {
  Tape& t = scores.tape();
  const Tensor& s = scores.value();
  if (s.cols() != 1) throw ShapeError("softmax_masked: scores must be a column vector");
  if (active.empty()) throw UsageError("softmax_masked: empty active set");
  std::vector<double> picked;
  picked.reserve(active.size());
  for (std::size_t idx : active) {
    if (idx >= s.rows()) throw ShapeError("softmax_masked: active index out of range");
    picked.push_back(s[idx]);
  }
  Tape::Node n;
  n.op = Op::kSoftmaxMasked;
  n.lhs = scores.id();
  n.indices.assign(active.begin(), active.end());
  n.requires_grad = t.requires_grad(scores);
  n.value = Tensor::column(softmax(picked));
  return t.push(std::move(n), "softmax_masked");
}

Var cross_entropy(Var logits, std::size_t label) {
  Tape& t = logits.tape();
  const Tensor& z = logits.value();
  if (z.cols() != 1) throw ShapeError("cross_entropy: logits must be a column vector");
  if (label >= z.rows()) {
    throw UsageError("cross_entropy: label " + std::to_string(label) + " out of range [0," +
                     std::to_string(z.rows()) + ")");
  }
  const auto zs = z.data();
  const double top = *std::max_element(zs.begin(), zs.end());
  double total = 0.0;
  for (double v : zs) total += std::exp(v - top);
  Tape::Node n;
  n.op = Op::kCrossEntropy;
  n.lhs = logits.id();
  n.indices = {label};
  n.requires_grad = t.requires_grad(logits);
  n.value = Tensor(1, 1, top + std::log(total) - z[label]);
  return t.push(std::move(n), "cross_entropy");
}

}  // namespace disclstm::ad
