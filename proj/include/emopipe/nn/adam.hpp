#pragma once

#include <cstdint>

#include "emopipe/nn/common.hpp"

namespace emopipe::nn {

struct AdamConfig {
  double learning_rate = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  ParamBuffers<T> first_moment;
  ParamBuffers<T> second_moment;
};

template <typename T>
AdamState<T> make_adam_state(const ParamViews<T>& params, AdamConfig config = {});

/// One bias-corrected Adam update:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,  t <- t+1
///   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
/// Throws ShapeMismatch when params, grads and state disagree.
template <typename T>
void adam_step(const ParamViews<T>& params, const ParamBuffers<T>& grads, AdamState<T>& state);

}  // namespace emopipe::nn
