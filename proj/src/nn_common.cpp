#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "emopipe/error.hpp"
#include "emopipe/nn/common.hpp"

namespace emopipe::nn {

template <typename T>
void softmax_inplace(std::span<T> logits) {
  if (logits.empty()) return;
  const T peak = *std::max_element(logits.begin(), logits.end());
  T total = 0;
  for (auto& v : logits) {
    v = std::exp(v - peak);
    total += v;
  }
  for (auto& v : logits) v /= total;
}

template <typename T>
double cross_entropy(std::span<const T> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw Error(ErrorKind::IndexOutOfRange,
                fmt::format("label {} with {} classes", label, probs.size()));
  }
  return -std::log(std::max(static_cast<double>(probs[label]), kCrossEntropyFloor));
}

template <typename T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

template <typename T>
void glorot_uniform(std::span<T> out, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : out) v = static_cast<T>(dist(rng));
}

template <typename T>
ParamBuffers<T> zeros_like(const ParamViews<T>& params) {
  ParamBuffers<T> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.size(), T{0});
  return out;
}

KeepMask sample_keep_mask(std::size_t units, double rate, Rng& rng) {
  KeepMask mask(units, 1);
  if (rate <= 0.0) return mask;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& m : mask) m = unit(rng) >= rate ? 1 : 0;
  return mask;
}

std::vector<std::string> default_class_labels() { return {"happiness", "neutral"}; }

#define EMOPIPE_INSTANTIATE(T)                                                          \
  template void softmax_inplace<T>(std::span<T>);                                       \
  template double cross_entropy<T>(std::span<const T>, std::size_t);                   \
  template std::size_t argmax<T>(std::span<const T>);                                  \
  template void glorot_uniform<T>(std::span<T>, std::size_t, std::size_t, Rng&);        \
  template ParamBuffers<T> zeros_like<T>(const ParamViews<T>&);

EMOPIPE_INSTANTIATE(float)
EMOPIPE_INSTANTIATE(double)
#undef EMOPIPE_INSTANTIATE

}  // namespace emopipe::nn
