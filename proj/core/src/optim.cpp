#include "lossforge/optim.hpp"

#include <cmath>

#include "lossforge/error.hpp"

namespace lossforge {

void adam_step(AdamState& state, std::span<const ParamBlock> params,
               std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameter blocks but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.step > 0 && state.m.size() != params.size()) {
    throw ShapeError("adam_step: parameter block count changed between steps");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].values.size() != grads[b].size()) {
      throw ShapeError("adam_step: gradient size mismatch in " + params[b].name);
    }
    if (state.step > 0 && state.m[b].size() != params[b].values.size()) {
      throw ShapeError("adam_step: " + params[b].name + " changed size between steps");
    }
    for (double g : grads[b]) {
      if (!std::isfinite(g)) throw DivergenceError("adam_step: non-finite gradient in " + params[b].name);
    }
  }
  if (state.step == 0) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t b = 0; b < params.size(); ++b) {
      state.m[b].assign(params[b].values.size(), 0.0);
      state.v[b].assign(params[b].values.size(), 0.0);
    }
  }

  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double m_correction = 1.0 - std::pow(c.beta1, t);
  const double v_correction = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto w = params[b].values;
    auto g = grads[b];
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / m_correction;
      const double v_hat = v[k] / v_correction;
      w[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace lossforge
