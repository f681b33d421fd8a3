#include "tmac/optimizer.hpp"

#include <cmath>
#include <string>

#include "tmac/error.hpp"

namespace tmac {

void adam_step(ModelParams& params, const std::vector<Tensor>& grads, double lr,
               const AdamConfig& config) {
  auto named = named_parameters(params);
  auto& state = params.adam;
  if (grads.size() != named.size() || state.first_moment.size() != named.size() ||
      state.second_moment.size() != named.size()) {
    throw DimensionError("adam_step: " + std::to_string(grads.size()) + " gradients, " +
                         std::to_string(named.size()) + " parameters, " +
                         std::to_string(state.first_moment.size()) + " moment slots");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < named.size(); ++k) {
    Tensor& p = *named[k].tensor;
    const Tensor& g = grads[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    if (!p.same_shape(g) || !p.same_shape(m) || !p.same_shape(v)) {
      throw DimensionError("adam_step: shape mismatch for " + named[k].name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    if (!p.all_finite()) throw NumericError("adam_step: parameter " + named[k].name + " became non-finite");
  }
}

}  // namespace tmac
