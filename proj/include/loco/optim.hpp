#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include "loco/graph.hpp"

namespace loco {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates for every parameter of one ParameterSet.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

/// Thrown by adam_step when a gradient holds NaN/Inf; parameters and state are
/// left exactly as they were.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One bias-corrected Adam update using the gradients accumulated in `params`.
void adam_step(ParameterSet& params, AdamState& state);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t elements_checked = 0;
};

/// Builds the scalar loss on a fresh graph. Must be a pure function of the
/// parameter values (masks and inputs frozen inside the closure).
using LossBuilder = std::function<Var(Graph&)>;

/// Compares backward() against central differences (L(θ+ε) − L(θ−ε)) / 2ε for
/// every element of every parameter. Relative error per element is
/// |a − n| / max(|a|, |n|, 1e-8). Parameter values are restored bit-exactly.
GradCheckReport finite_diff_check(ParameterSet& params, const LossBuilder& build_loss,
                                  double epsilon = 1e-4);

}  // namespace loco
