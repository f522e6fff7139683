#include "loco/graph.hpp"

#include <Eigen/Core>
#include <cmath>

namespace loco {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap as_mat(const Tensor& t) {
  return ConstMatMap(t.raw(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}
MatMap as_mat(Tensor& t) {
  return MatMap(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

enum class Broadcast { kNone, kRow, kScalar };

// How `b` spreads over `a` for add/hadamard; kNone means equal shapes.
bool broadcast_kind(const Tensor& a, const Tensor& b, Broadcast& kind) {
  if (a.rank() != 2 || b.rank() != 2) return false;
  if (a.shape() == b.shape()) {
    kind = Broadcast::kNone;
    return true;
  }
  if (b.rows() == 1 && b.cols() == 1) {
    kind = Broadcast::kScalar;
    return true;
  }
  if (b.rows() == 1 && b.cols() == a.cols()) {
    kind = Broadcast::kRow;
    return true;
  }
  return false;
}

double b_at(const Tensor& b, Broadcast kind, std::size_t r, std::size_t c, std::size_t idx) {
  switch (kind) {
    case Broadcast::kNone:
      return b[idx];
    case Broadcast::kRow:
      return b[c];
    case Broadcast::kScalar:
      return b[0];
  }
  (void)r;
  return 0.0;
}

// Folds a full-shaped gradient back onto b's (possibly broadcast) shape.
Tensor reduce_to(const Tensor& full, const Tensor& b, Broadcast kind) {
  if (kind == Broadcast::kNone) return full;
  Tensor out(b.shape(), 0.0);
  const std::size_t rows = full.rows();
  const std::size_t cols = full.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (kind == Broadcast::kRow) {
        out[c] += full(r, c);
      } else {
        out[0] += full(r, c);
      }
    }
  }
  return out;
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kInput: return "input";
    case OpKind::kParam: return "param";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kHadamard: return "hadamard";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kSum: return "sum";
    case OpKind::kAbs: return "abs";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ParameterSet

Tensor& ParameterSet::add(const std::string& name, Tensor value) {
  if (values_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  grads_[name] = Tensor(value.shape(), 0.0);
  return values_[name] = std::move(value);
}

Tensor& ParameterSet::add_glorot(const std::string& name, std::size_t rows, std::size_t cols,
                                 std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& x : t.data()) x = dist(rng);
  return add(name, std::move(t));
}

Tensor& ParameterSet::value(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParameterSet::value(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParameterSet::grad(const std::string& name) {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParameterSet::grad(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(values_.size());
  for (const auto& [name, _] : values_) out.push_back(name);
  return out;
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : values_) n += t.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [_, g] : grads_) g.fill(0.0);
}

// ---------------------------------------------------------------------------
// Graph: forward

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Tensor& Graph::val(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.view ? *n.view : n.value;
}

const Tensor& Graph::value(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("graph node out of range");
  return val(v.id);
}

void Graph::reject(OpKind op, const std::string& detail) const {
  throw ShapeError("node " + std::to_string(nodes_.size()) + " (" + op_name(op) + "): " + detail);
}

Var Graph::input(Tensor value, std::string name) {
  if (value.rank() != 2) reject(OpKind::kInput, "inputs must be rank 2, got " + shape_string(value.shape()));
  Node n;
  n.op = OpKind::kInput;
  n.value = std::move(value);
  n.name = std::move(name);
  return push(std::move(n));
}

Var Graph::constant_view(const Tensor& value, std::string name) {
  if (value.rank() != 2) reject(OpKind::kInput, "inputs must be rank 2, got " + shape_string(value.shape()));
  Node n;
  n.op = OpKind::kInput;
  n.view = &value;
  n.name = std::move(name);
  return push(std::move(n));
}

Var Graph::param(ParameterSet& params, const std::string& name) {
  const Tensor& v = params.value(name);
  if (v.rank() != 2) reject(OpKind::kParam, "parameter '" + name + "' must be rank 2");
  Node n;
  n.op = OpKind::kParam;
  n.view = &v;
  n.params = &params;
  n.name = name;
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.rows()) {
    reject(OpKind::kMatmul, shape_string(A.shape()) + " x " + shape_string(B.shape()));
  }
  Tensor out = Tensor::matrix(A.rows(), B.cols());
  as_mat(out).noalias() = as_mat(A) * as_mat(B);
  Node n;
  n.op = OpKind::kMatmul;
  n.inputs = {a.id, b.id};
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  Broadcast kind{};
  if (!broadcast_kind(A, B, kind)) {
    reject(OpKind::kAdd, shape_string(A.shape()) + " + " + shape_string(B.shape()));
  }
  Tensor out = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b_at(B, kind, i / cols, i % cols, i);
  Node n;
  n.op = OpKind::kAdd;
  n.inputs = {a.id, b.id};
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::hadamard(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  Broadcast kind{};
  if (!broadcast_kind(A, B, kind)) {
    reject(OpKind::kHadamard, shape_string(A.shape()) + " * " + shape_string(B.shape()));
  }
  Tensor out = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b_at(B, kind, i / cols, i % cols, i);
  Node n;
  n.op = OpKind::kHadamard;
  n.inputs = {a.id, b.id};
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::sigmoid(Var a) {
  Tensor out = value(a);
  for (double& x : out.data()) {
    // Split by sign so exp() never overflows.
    x = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  Node n;
  n.op = OpKind::kSigmoid;
  n.inputs = {a.id};
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::tanh(Var a) {
  Tensor out = value(a);
  for (double& x : out.data()) x = std::tanh(x);
  Node n;
  n.op = OpKind::kTanh;
  n.inputs = {a.id};
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::relu(Var a) {
  Tensor out = value(a);
  for (double& x : out.data()) x = x > 0 ? x : 0.0;
  Node n;
  n.op = OpKind::kRelu;
  n.inputs = {a.id};
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::abs(Var a) {
  Tensor out = value(a);
  for (double& x : out.data()) x = std::fabs(x);
  Node n;
  n.op = OpKind::kAbs;
  n.inputs = {a.id};
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::sum(Var a) {
  double s = 0.0;
  for (double x : value(a).data()) s += x;
  Node n;
  n.op = OpKind::kSum;
  n.inputs = {a.id};
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Var Graph::concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) reject(OpKind::kConcat, "no operands");
  if (axis != 0 && axis != 1) reject(OpKind::kConcat, "axis must be 0 or 1");
  const Tensor& first = value(parts.front());
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (axis == 0) {
      if (t.cols() != first.cols()) {
        reject(OpKind::kConcat, "row concat of " + shape_string(first.shape()) + " and " +
                                    shape_string(t.shape()));
      }
      rows += t.rows();
      cols = t.cols();
    } else {
      if (t.rows() != first.rows()) {
        reject(OpKind::kConcat, "column concat of " + shape_string(first.shape()) + " and " +
                                    shape_string(t.shape()));
      }
      cols += t.cols();
      rows = t.rows();
    }
  }
  Tensor out = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  Node n;
  n.op = OpKind::kConcat;
  n.axis = axis;
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (axis == 0) {
      std::copy(t.data().begin(), t.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset * cols));
      offset += t.rows();
    } else {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < t.cols(); ++c) out(r, offset + c) = t(r, c);
      }
      offset += t.cols();
    }
    n.inputs.push_back(p.id);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::slice(Var a, int axis, std::size_t begin, std::size_t end) {
  const Tensor& A = value(a);
  if (axis != 0 && axis != 1) reject(OpKind::kSlice, "axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? A.rows() : A.cols();
  if (begin >= end || end > extent) {
    reject(OpKind::kSlice, "range [" + std::to_string(begin) + "," + std::to_string(end) +
                               ") outside extent " + std::to_string(extent));
  }
  Tensor out;
  if (axis == 0) {
    out = Tensor::matrix(end - begin, A.cols());
    auto src = A.data().subspan(begin * A.cols(), (end - begin) * A.cols());
    std::copy(src.begin(), src.end(), out.data().begin());
  } else {
    out = Tensor::matrix(A.rows(), end - begin);
    for (std::size_t r = 0; r < A.rows(); ++r) {
      for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = A(r, c);
    }
  }
  Node n;
  n.op = OpKind::kSlice;
  n.inputs = {a.id};
  n.axis = axis;
  n.begin = begin;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::scale(Var a, double s) { return hadamard(a, input(Tensor::scalar(s))); }

Var Graph::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Graph::one_minus(Var a) { return add(scale(a, -1.0), input(Tensor::scalar(1.0))); }

Var Graph::mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(value(a).size())); }

// ---------------------------------------------------------------------------
// Graph: backward

Tensor& Graph::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(val(id).shape(), 0.0);
  return n.grad;
}

void Graph::accumulate(std::size_t id, const Tensor& g) {
  Tensor& slot = grad_slot(id);
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
}

const Tensor& Graph::grad(Var v) const {
  static const Tensor kEmpty;
  if (v.id >= nodes_.size()) throw std::out_of_range("graph node out of range");
  return nodes_[v.id].grad.size() ? nodes_[v.id].grad : kEmpty;
}

void Graph::backward(Var loss) {
  if (loss.id >= nodes_.size()) throw std::out_of_range("graph node out of range");
  if (val(loss.id).size() != 1) {
    throw ShapeError("backward: loss node " + std::to_string(loss.id) + " is " +
                     shape_string(val(loss.id).shape()) + ", expected a scalar");
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_slot(loss.id)[0] = 1.0;
  backward_order_.clear();

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    backward_order_.push_back(id);
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    const Tensor& G = n.grad;
    const Tensor& Y = val(id);
    switch (n.op) {
      case OpKind::kInput:
        break;
      case OpKind::kParam: {
        Tensor& acc = n.params->grad(n.name);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += G[i];
        break;
      }
      case OpKind::kMatmul: {
        const Tensor& A = val(n.inputs[0]);
        const Tensor& B = val(n.inputs[1]);
        Tensor dA(A.shape(), 0.0);
        Tensor dB(B.shape(), 0.0);
        as_mat(dA).noalias() = as_mat(G) * as_mat(B).transpose();
        as_mat(dB).noalias() = as_mat(A).transpose() * as_mat(G);
        accumulate(n.inputs[0], dA);
        accumulate(n.inputs[1], dB);
        break;
      }
      case OpKind::kAdd: {
        const Tensor& A = val(n.inputs[0]);
        const Tensor& B = val(n.inputs[1]);
        Broadcast kind{};
        broadcast_kind(A, B, kind);
        accumulate(n.inputs[0], G);
        accumulate(n.inputs[1], reduce_to(G, B, kind));
        break;
      }
      case OpKind::kHadamard: {
        const Tensor& A = val(n.inputs[0]);
        const Tensor& B = val(n.inputs[1]);
        Broadcast kind{};
        broadcast_kind(A, B, kind);
        Tensor dA = G;
        Tensor dBfull = G;
        const std::size_t cols = A.cols();
        for (std::size_t i = 0; i < G.size(); ++i) {
          dA[i] *= b_at(B, kind, i / cols, i % cols, i);
          dBfull[i] *= A[i];
        }
        accumulate(n.inputs[0], dA);
        accumulate(n.inputs[1], reduce_to(dBfull, B, kind));
        break;
      }
      case OpKind::kSigmoid: {
        Tensor d = G;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= Y[i] * (1.0 - Y[i]);
        accumulate(n.inputs[0], d);
        break;
      }
      case OpKind::kTanh: {
        Tensor d = G;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - Y[i] * Y[i];
        accumulate(n.inputs[0], d);
        break;
      }
      case OpKind::kRelu: {
        const Tensor& X = val(n.inputs[0]);
        Tensor d = G;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = X[i] > 0 ? d[i] : 0.0;
        accumulate(n.inputs[0], d);
        break;
      }
      case OpKind::kAbs: {
        const Tensor& X = val(n.inputs[0]);
        Tensor d = G;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= (X[i] > 0) - (X[i] < 0);
        accumulate(n.inputs[0], d);
        break;
      }
      case OpKind::kSum: {
        Tensor d(val(n.inputs[0]).shape(), G[0]);
        accumulate(n.inputs[0], d);
        break;
      }
      case OpKind::kConcat: {
        std::size_t offset = 0;
        for (std::size_t in : n.inputs) {
          const Tensor& part = val(in);
          Tensor d(part.shape(), 0.0);
          if (n.axis == 0) {
            auto src = G.data().subspan(offset * G.cols(), part.size());
            std::copy(src.begin(), src.end(), d.data().begin());
            offset += part.rows();
          } else {
            for (std::size_t r = 0; r < part.rows(); ++r) {
              for (std::size_t c = 0; c < part.cols(); ++c) d(r, c) = G(r, offset + c);
            }
            offset += part.cols();
          }
          accumulate(in, d);
        }
        break;
      }
      case OpKind::kSlice: {
        Tensor& slot = grad_slot(n.inputs[0]);
        if (n.axis == 0) {
          const std::size_t base = n.begin * slot.cols();
          for (std::size_t i = 0; i < G.size(); ++i) slot[base + i] += G[i];
        } else {
          for (std::size_t r = 0; r < G.rows(); ++r) {
            for (std::size_t c = 0; c < G.cols(); ++c) slot(r, n.begin + c) += G(r, c);
          }
        }
        break;
      }
    }
  }
}

}  // namespace loco
