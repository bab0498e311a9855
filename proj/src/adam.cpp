#include "emopipe/nn/adam.hpp"

#include <cmath>

#include <fmt/format.h>

#include "emopipe/error.hpp"

namespace emopipe::nn {

template <typename T>
AdamState<T> make_adam_state(const ParamViews<T>& params, AdamConfig config) {
  AdamState<T> state;
  state.config = config;
  state.first_moment = zeros_like(params);
  state.second_moment = zeros_like(params);
  return state;
}

template <typename T>
void adam_step(const ParamViews<T>& params, const ParamBuffers<T>& grads, AdamState<T>& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch,
                fmt::format("{} parameter tensors, {} gradients", params.size(), grads.size()));
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    const auto n = params[t].size();
    if (grads[t].size() != n || state.first_moment[t].size() != n || state.second_moment[t].size() != n) {
      throw Error(ErrorKind::ShapeMismatch, fmt::format("tensor {} shape differs", t));
    }
  }

  const auto& cfg = state.config;
  state.step += 1;
  const double step = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, step);
  const double correction2 = 1.0 - std::pow(cfg.beta2, step);

  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    const auto& g = grads[t];
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      p[i] = static_cast<T>(static_cast<double>(p[i]) - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

template AdamState<float> make_adam_state<float>(const ParamViews<float>&, AdamConfig);
template AdamState<double> make_adam_state<double>(const ParamViews<double>&, AdamConfig);
template void adam_step<float>(const ParamViews<float>&, const ParamBuffers<float>&, AdamState<float>&);
template void adam_step<double>(const ParamViews<double>&, const ParamBuffers<double>&, AdamState<double>&);

}  // namespace emopipe::nn
