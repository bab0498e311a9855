#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emopipe/nn/common.hpp"

namespace emopipe::nn {

/// Multilayer perceptron: relu hidden layers, each followed by dropout, and a
/// softmax output layer.
template <typename T>
struct BasicMlp {
  std::vector<DenseLayer<T>> layers;
  std::vector<double> dropout_rates;  // one per hidden layer
  std::vector<std::string> class_labels;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }
  std::size_t parameter_count() const;

  // Throws DimensionMismatch when dims do not chain or activations are off.
  void validate() const;

  ParamViews<T> parameters();
  ParamViews<const T> parameters() const;
};

using MlpModel = BasicMlp<float>;

/// One keep mask per hidden layer; empty means no dropout (inference).
using MlpMask = std::vector<KeepMask>;

/// `dims` lists every layer width from input to output, e.g. {114, 64, 32, 2}.
/// Weights are Glorot-uniform from `seed`, biases zero.
MlpModel make_mlp(const std::vector<std::size_t>& dims, double dropout_rate,
                  std::vector<std::string> class_labels, std::uint64_t seed);

/// input -> 1024 -> 512 -> 256 -> 2, dropout 0.5 after each hidden layer.
MlpModel make_default_mlp(std::size_t input_dim, std::uint64_t seed);

template <typename U, typename T>
BasicMlp<U> convert_mlp(const BasicMlp<T>& model);

template <typename T>
MlpMask sample_mlp_mask(const BasicMlp<T>& model, Rng& rng);

/// Class probabilities for one input. A null or empty mask means inference.
/// Throws DimensionMismatch.
template <typename T>
std::vector<T> mlp_forward(const BasicMlp<T>& model, std::span<const T> x,
                           const MlpMask* mask = nullptr);

/// Gradient of the mean cross-entropy over the batch w.r.t. every parameter, in
/// parameters() order. `masks` is empty (no dropout) or has one entry per row.
/// If `stats` is given it receives the batch loss and hit count under the same masks.
template <typename T>
ParamBuffers<T> mlp_backward(const BasicMlp<T>& model, std::span<const std::span<const T>> inputs,
                             std::span<const std::size_t> labels, std::span<const MlpMask> masks,
                             BatchStats* stats = nullptr);

/// Mean cross-entropy over the batch under the given masks.
template <typename T>
double mlp_batch_loss(const BasicMlp<T>& model, std::span<const std::span<const T>> inputs,
                      std::span<const std::size_t> labels, std::span<const MlpMask> masks);

}  // namespace emopipe::nn
