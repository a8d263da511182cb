#include "numerics/adam.hpp"

#include <cmath>

#include "core/error.hpp"

namespace histograph::numerics {

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state) {
  if (params.size() != grads.size()) {
    fail(ErrorKind::Shape, "adam_step: " + std::to_string(params.size()) + " parameters but " +
                               std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape(), 0.0);
      state.v.emplace_back(p->shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) fail(ErrorKind::Shape, "adam_step: state built for a different parameter list");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.m[k].shape() != params[k]->shape() ||
        (grads[k] && grads[k]->shape() != params[k]->shape())) {
      fail(ErrorKind::Shape, "adam_step: shape mismatch for parameter " + std::to_string(k));
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->data();
    auto m = state.m[k].data();
    auto v = state.v[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grads[k] ? (*grads[k])[i] : 0.0;
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    require_finite(*params[k], "adam_step");
  }
}

}  // namespace histograph::numerics
