#pragma once

#include <map>
#include <random>
#include <string>

#include "loco/graph.hpp"

namespace loco {

/// Resolves parameter names to graph leaves, once per graph. A frozen scope
/// reads the values without collecting gradients.
class ParamScope {
 public:
  ParamScope(Graph& graph, ParameterSet& params, bool trainable = true)
      : graph_(&graph), params_(trainable ? &params : nullptr), view_(&params) {}
  /// Frozen scope over read-only parameters.
  ParamScope(Graph& graph, const ParameterSet& params)
      : graph_(&graph), params_(nullptr), view_(&params) {}

  Var operator()(const std::string& name);
  Graph& graph() const { return *graph_; }
  bool trainable() const { return params_ != nullptr; }

 private:
  Graph* graph_;
  ParameterSet* params_;
  const ParameterSet* view_;
  std::map<std::string, Var> cache_;
};

enum class Activation { kTanh, kLinear, kRelu };
Activation parse_activation(const std::string& name);
const char* activation_name(Activation a);

/// x W + b followed by the activation; parameters <prefix>.W and <prefix>.b.
Var dense(ParamScope& scope, const std::string& prefix, Var x, Activation act);
void init_dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                std::mt19937_64& rng);

}  // namespace loco
