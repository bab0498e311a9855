#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emopipe/features.hpp"
#include "emopipe/nn/common.hpp"

namespace emopipe::nn {

struct CnnShape {
  int grid = 0;
  int conv = 0;       // (grid - kernel + 1)
  int pooled = 0;     // floor(conv / pool)
  int filters = 0;
  std::size_t flattened = 0;  // pooled^2 * filters
};

/// Valid 3x3 convolution (stride 1) -> relu -> 2x2 max pool (stride 2) ->
/// dropout -> flatten (row, column, filter order) -> dense softmax.
template <typename T>
struct BasicCnn {
  int grid_size = kDefaultGridSize;
  int filters = 32;
  int kernel = 3;
  int pool = 2;
  double dropout_rate = 0.25;
  std::vector<T> conv_weights;  // filters x kernel x kernel
  std::vector<T> conv_biases;   // filters
  DenseLayer<T> dense;
  std::vector<std::string> class_labels;

  CnnShape shape() const;
  std::size_t parameter_count() const;
  void validate() const;

  ParamViews<T> parameters();
  ParamViews<const T> parameters() const;
};

using CnnModel = BasicCnn<float>;

CnnShape cnn_shape(int grid_size, int filters = 32, int kernel = 3, int pool = 2);

CnnModel make_cnn(int grid_size, std::vector<std::string> class_labels, std::uint64_t seed,
                  int filters = 32, double dropout_rate = 0.25);

template <typename U, typename T>
BasicCnn<U> convert_cnn(const BasicCnn<T>& model);

/// Keep mask over the flattened pooled units; empty means inference.
using CnnMask = KeepMask;

template <typename T>
CnnMask sample_cnn_mask(const BasicCnn<T>& model, Rng& rng);

/// Intermediate activations; exposed so tests can check the shape chain.
template <typename T>
struct CnnActivations {
  std::vector<T> conv;        // conv x conv x filters, post-relu
  std::vector<T> pooled;      // pooled x pooled x filters, post-dropout
  std::vector<std::size_t> pool_argmax;  // index into conv per pooled unit
  std::vector<T> probs;
};

template <typename T>
CnnActivations<T> cnn_forward_trace(const BasicCnn<T>& model, const LandmarkGrid& grid,
                                    const CnnMask* mask = nullptr);

/// Throws DimensionMismatch when the grid size differs from the model's.
template <typename T>
std::vector<T> cnn_forward(const BasicCnn<T>& model, const LandmarkGrid& grid,
                           const CnnMask* mask = nullptr);

template <typename T>
ParamBuffers<T> cnn_backward(const BasicCnn<T>& model, std::span<const LandmarkGrid* const> grids,
                             std::span<const std::size_t> labels, std::span<const CnnMask> masks,
                             BatchStats* stats = nullptr);

template <typename T>
double cnn_batch_loss(const BasicCnn<T>& model, std::span<const LandmarkGrid* const> grids,
                      std::span<const std::size_t> labels, std::span<const CnnMask> masks);

}  // namespace emopipe::nn
