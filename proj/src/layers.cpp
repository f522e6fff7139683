#include "loco/layers.hpp"

#include <stdexcept>

namespace loco {

Var ParamScope::operator()(const std::string& name) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  Var v = params_ ? graph_->param(*params_, name) : graph_->constant_view(view_->value(name), name);
  cache_.emplace(name, v);
  return v;
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "linear") return Activation::kLinear;
  if (name == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

Var dense(ParamScope& scope, const std::string& prefix, Var x, Activation act) {
  Graph& g = scope.graph();
  Var y = g.add(g.matmul(x, scope(prefix + ".W")), scope(prefix + ".b"));
  switch (act) {
    case Activation::kTanh: return g.tanh(y);
    case Activation::kRelu: return g.relu(y);
    case Activation::kLinear: return y;
  }
  return y;
}

void init_dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                std::mt19937_64& rng) {
  params.add_glorot(prefix + ".W", in, out, rng);
  params.add(prefix + ".b", Tensor::matrix(1, out));
}

}  // namespace loco
