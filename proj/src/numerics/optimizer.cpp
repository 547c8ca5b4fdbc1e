#include "braingraph/numerics/optimizer.hpp"

#include <cmath>

#include "braingraph/errors.hpp"

namespace braingraph {

void adam_step(ParameterSet& params, const Gradients& grads, OptimizerState& state) {
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) throw TrainingError("non-finite gradient for " + name);
    if (g.shape() != params.get(name).value.shape()) {
      throw DimensionError("gradient shape mismatch for " + name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  for (const auto& [name, g] : grads) {
    Parameter& p = params.get(name);
    auto [it, inserted] = state.moments.try_emplace(name);
    Moments& mo = it->second;
    if (inserted) {
      mo.first = Tensor(g.shape(), 0.0);
      mo.second = Tensor(g.shape(), 0.0);
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      mo.first[i] = state.beta1 * mo.first[i] + (1.0 - state.beta1) * g[i];
      mo.second[i] = state.beta2 * mo.second[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = mo.first[i] / correction1;
      const double v_hat = mo.second[i] / correction2;
      p.value[i] -= state.learning_rate * (m_hat / (std::sqrt(v_hat) + state.epsilon) + state.weight_decay * p.value[i]);
    }
    if (!p.value.all_finite()) throw TrainingError("parameter " + name + " became non-finite");
  }
}

std::pair<double, double> glorot_fans(const Shape& shape) {
  if (shape.empty()) return {1.0, 1.0};
  if (shape.size() == 1) return {double(shape[0]), double(shape[0])};
  if (shape.size() == 2) return {double(shape[0]), double(shape[1])};
  double receptive = 1.0;
  for (std::size_t i = 2; i < shape.size(); ++i) receptive *= double(shape[i]);
  return {double(shape[1]) * receptive, double(shape[0]) * receptive};
}

double glorot_bound(const Shape& shape) {
  const auto [fan_in, fan_out] = glorot_fans(shape);
  return std::sqrt(6.0 / (fan_in + fan_out));
}

Tensor init_params(const Shape& shape, const Init& init, Rng& rng) {
  Tensor t(shape, 0.0);
  switch (init.scheme) {
    case InitScheme::zeros:
      break;
    case InitScheme::glorot_uniform: {
      const double bound = glorot_bound(shape);
      for (auto& v : t.values()) v = rng.uniform(-bound, bound);
      break;
    }
    case InitScheme::normal:
      for (auto& v : t.values()) v = rng.normal(0.0, init.stddev);
      break;
  }
  return t;
}

}  // namespace braingraph
