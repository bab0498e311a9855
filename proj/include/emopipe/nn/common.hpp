#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace emopipe::nn {

using Rng = std::mt19937_64;

enum class Activation : std::uint8_t { Relu = 0, Softmax = 1 };

/// Flat views of every trainable tensor, in a fixed model-defined order.
template <typename T>
using ParamViews = std::vector<std::span<T>>;

/// Owning counterpart of ParamViews with identical shapes (gradients, moments).
template <typename T>
using ParamBuffers = std::vector<std::vector<T>>;

/// Fully connected layer, weights stored out x in, row-major.
template <typename T>
struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<T> weights;
  std::vector<T> biases;
  Activation activation = Activation::Relu;
};

/// Numerically stable softmax, in place.
template <typename T>
void softmax_inplace(std::span<T> logits);

/// -ln(max(probs[label], 1e-12)). Throws Error(IndexOutOfRange).
template <typename T>
double cross_entropy(std::span<const T> probs, std::size_t label);

inline constexpr double kCrossEntropyFloor = 1e-12;

/// Index of the largest entry; ties resolve to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> values);

// Glorot-uniform fill in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(std::span<T> out, std::size_t fan_in, std::size_t fan_out, Rng& rng);

template <typename T>
ParamBuffers<T> zeros_like(const ParamViews<T>& params);

template <typename To, typename From>
std::vector<To> cast_vector(std::span<const From> in) {
  std::vector<To> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<To>(in[i]);
  return out;
}

/// Side results of a backward pass, under the same dropout masks.
struct BatchStats {
  double mean_loss = 0.0;
  std::size_t correct = 0;  // argmax hits
};

/// Per-unit keep flags for inverted dropout.
using KeepMask = std::vector<std::uint8_t>;

// Keeps each unit with probability 1 - rate.
KeepMask sample_keep_mask(std::size_t units, double rate, Rng& rng);

std::vector<std::string> default_class_labels();

}  // namespace emopipe::nn
