#include "loco/optim.hpp"

#include <algorithm>
#include <cmath>

namespace loco {

void adam_step(ParameterSet& params, AdamState& state) {
  const auto names = params.names();
  for (const auto& name : names) {
    if (!params.grad(name).all_finite()) {
      throw NonFiniteGradient("adam_step: non-finite gradient in parameter '" + name + "'");
    }
  }
  const AdamConfig& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  for (const auto& name : names) {
    Tensor& w = params.value(name);
    const Tensor& g = params.grad(name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, w.shape(), 0.0);
    auto [v_it, v_new] = state.second_moment.try_emplace(name, w.shape(), 0.0);
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    if (!m.same_shape(w) || !v.same_shape(w)) {
      throw ShapeError("adam_step: moment shape mismatch for '" + name + "'");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

GradCheckReport finite_diff_check(ParameterSet& params, const LossBuilder& build_loss,
                                  double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw std::invalid_argument("finite_diff_check: epsilon must lie in [1e-6, 1e-3]");
  }
  // Analytic gradients into a private copy so the caller's accumulators are untouched.
  std::map<std::string, Tensor> saved_grads;
  for (const auto& name : params.names()) saved_grads.emplace(name, params.grad(name));
  params.zero_grad();
  {
    Graph g;
    Var loss = build_loss(g);
    g.backward(loss);
  }
  std::map<std::string, Tensor> analytic;
  for (const auto& name : params.names()) analytic.emplace(name, params.grad(name));
  for (auto& [name, grad] : saved_grads) params.grad(name) = grad;

  auto eval = [&]() {
    Graph g;
    Var loss = build_loss(g);
    return g.value(loss)[0];
  };

  GradCheckReport report;
  for (const auto& name : params.names()) {
    Tensor& w = params.value(name);
    const Tensor& a = analytic.at(name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double original = w[i];
      w[i] = original + epsilon;
      const double plus = eval();
      w[i] = original - epsilon;
      const double minus = eval();
      w[i] = original;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double denom = std::max({std::fabs(a[i]), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a[i] - numeric) / denom;
      ++report.elements_checked;
      if (report.worst_parameter.empty() || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = name;
        report.worst_index = i;
        report.analytic = a[i];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace loco
