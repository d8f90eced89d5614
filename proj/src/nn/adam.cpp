#include "dro/nn/adam.hpp"

#include <cmath>

namespace dro::nn {

void adam_step(const std::vector<Parameter*>& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(Tensor::zeros_like(p->value));
      state.v.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (state.m.size() != params.size())
    throw PreconditionError("optimizer state was built for a different parameter list");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (p.grad.empty()) continue;
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.value[i] -= cfg.lr * cfg.weight_decay * p.value[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      p.value[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

}  // namespace dro::nn
