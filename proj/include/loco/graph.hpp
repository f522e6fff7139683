#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "loco/tensor.hpp"

namespace loco {

/// Named trainable tensors plus their gradient accumulators. Iteration order
/// is the lexicographic order of names, which keeps checkpoints and optimizer
/// trajectories deterministic.
class ParameterSet {
 public:
  Tensor& add(const std::string& name, Tensor value);
  /// Adds a [rows, cols] tensor drawn from U(-a, a) with a = sqrt(6/(rows+cols)).
  Tensor& add_glorot(const std::string& name, std::size_t rows, std::size_t cols,
                     std::mt19937_64& rng);

  bool contains(const std::string& name) const { return values_.count(name) != 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t size() const { return values_.size(); }
  std::size_t element_count() const;
  void zero_grad();

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.values_ == b.values_;
  }

 private:
  std::map<std::string, Tensor> values_;
  std::map<std::string, Tensor> grads_;
};

/// Handle to a node of a Graph.
struct Var {
  std::size_t id = 0;
};

enum class OpKind : std::uint8_t {
  kInput,
  kParam,
  kMatmul,
  kAdd,
  kSigmoid,
  kTanh,
  kRelu,
  kHadamard,
  kConcat,
  kSlice,
  kSum,
  kAbs,
};

const char* op_name(OpKind op);

/// Define-by-run reverse-mode tape. Each op evaluates immediately and records
/// enough to run its backward rule; backward() walks the tape in exact reverse
/// order of creation.
///
/// add() and hadamard() broadcast their second operand when it is [1, 1] or
/// [1, cols]; everything else requires equal shapes.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor value, std::string name = {});
  /// Leaf that reads `value` without copying and never receives gradient
  /// accumulation. The tensor must outlive the graph.
  Var constant_view(const Tensor& value, std::string name = {});
  /// Trainable leaf; backward() accumulates into params.grad(name).
  Var param(ParameterSet& params, const std::string& name);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var hadamard(Var a, Var b);
  Var concat(std::span<const Var> parts, int axis);
  Var slice(Var a, int axis, std::size_t begin, std::size_t end);
  Var sum(Var a);
  Var abs(Var a);

  // Compositions of the primitives above.
  Var scale(Var a, double s);
  Var sub(Var a, Var b);
  Var one_minus(Var a);
  Var mean(Var a);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  const std::vector<std::size_t>& shape(Var v) const { return value(v).shape(); }
  std::size_t node_count() const { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_.at(v.id).op; }
  const std::string& name(Var v) const { return nodes_.at(v.id).name; }

  /// Seeds d(loss)/d(loss) = 1 and back-propagates. Parameter gradients are
  /// added to (not assigned into) their ParameterSet accumulators.
  void backward(Var loss);

  /// Node ids in the order the last backward() visited them.
  const std::vector<std::size_t>& last_backward_order() const { return backward_order_; }

 private:
  struct Node {
    OpKind op = OpKind::kInput;
    std::vector<std::size_t> inputs;
    Tensor value;
    const Tensor* view = nullptr;
    Tensor grad;
    ParameterSet* params = nullptr;
    std::string name;
    int axis = 0;
    std::size_t begin = 0;
  };

  Var push(Node node);
  const Tensor& val(std::size_t id) const;
  [[noreturn]] void reject(OpKind op, const std::string& detail) const;
  void accumulate(std::size_t id, const Tensor& g);
  Tensor& grad_slot(std::size_t id);

  std::vector<Node> nodes_;
  std::vector<std::size_t> backward_order_;
};

}  // namespace loco
