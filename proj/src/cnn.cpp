#include "emopipe/nn/cnn.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "emopipe/error.hpp"

namespace emopipe::nn {
namespace {

[[noreturn]] void mismatch(const std::string& what) { throw Error(ErrorKind::DimensionMismatch, what); }

}  // namespace

CnnShape cnn_shape(int grid_size, int filters, int kernel, int pool) {
  if (grid_size < kernel + pool - 1 || kernel < 1 || pool < 1 || filters < 1) {
    mismatch(fmt::format("grid {} too small for kernel {} and pool {}", grid_size, kernel, pool));
  }
  CnnShape s;
  s.grid = grid_size;
  s.conv = grid_size - kernel + 1;
  s.pooled = s.conv / pool;
  s.filters = filters;
  s.flattened = static_cast<std::size_t>(s.pooled) * static_cast<std::size_t>(s.pooled) *
                static_cast<std::size_t>(filters);
  return s;
}

template <typename T>
CnnShape BasicCnn<T>::shape() const {
  return cnn_shape(grid_size, filters, kernel, pool);
}

template <typename T>
std::size_t BasicCnn<T>::parameter_count() const {
  return conv_weights.size() + conv_biases.size() + dense.weights.size() + dense.biases.size();
}

template <typename T>
void BasicCnn<T>::validate() const {
  const auto s = shape();
  if (conv_weights.size() != static_cast<std::size_t>(filters * kernel * kernel) ||
      conv_biases.size() != static_cast<std::size_t>(filters)) {
    mismatch("convolution parameter sizes");
  }
  if (dense.in_dim != s.flattened) {
    mismatch(fmt::format("dense input {} but flattened pool output is {}", dense.in_dim, s.flattened));
  }
  if (dense.weights.size() != dense.in_dim * dense.out_dim || dense.biases.size() != dense.out_dim) {
    mismatch("dense parameter sizes");
  }
  if (dense.activation != Activation::Softmax) mismatch("output layer must use softmax");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) mismatch("dropout rate outside [0,1)");
  if (!class_labels.empty() && class_labels.size() != dense.out_dim) mismatch("class label count");
}

template <typename T>
ParamViews<T> BasicCnn<T>::parameters() {
  return {std::span<T>(conv_weights), std::span<T>(conv_biases), std::span<T>(dense.weights),
          std::span<T>(dense.biases)};
}

template <typename T>
ParamViews<const T> BasicCnn<T>::parameters() const {
  return {std::span<const T>(conv_weights), std::span<const T>(conv_biases),
          std::span<const T>(dense.weights), std::span<const T>(dense.biases)};
}

CnnModel make_cnn(int grid_size, std::vector<std::string> class_labels, std::uint64_t seed,
                  int filters, double dropout_rate) {
  const auto s = cnn_shape(grid_size, filters);
  Rng rng(seed);
  CnnModel m;
  m.grid_size = grid_size;
  m.filters = filters;
  m.dropout_rate = dropout_rate;
  m.conv_weights.resize(static_cast<std::size_t>(filters * m.kernel * m.kernel));
  m.conv_biases.assign(static_cast<std::size_t>(filters), 0.0f);
  const auto k2 = static_cast<std::size_t>(m.kernel * m.kernel);
  glorot_uniform<float>(m.conv_weights, k2, k2 * static_cast<std::size_t>(filters), rng);
  m.dense.in_dim = s.flattened;
  m.dense.out_dim = class_labels.size();
  m.dense.activation = Activation::Softmax;
  m.dense.weights.resize(m.dense.in_dim * m.dense.out_dim);
  m.dense.biases.assign(m.dense.out_dim, 0.0f);
  glorot_uniform<float>(m.dense.weights, m.dense.in_dim, m.dense.out_dim, rng);
  m.class_labels = std::move(class_labels);
  m.validate();
  return m;
}

template <typename U, typename T>
BasicCnn<U> convert_cnn(const BasicCnn<T>& model) {
  BasicCnn<U> out;
  out.grid_size = model.grid_size;
  out.filters = model.filters;
  out.kernel = model.kernel;
  out.pool = model.pool;
  out.dropout_rate = model.dropout_rate;
  out.conv_weights = cast_vector<U, T>(model.conv_weights);
  out.conv_biases = cast_vector<U, T>(model.conv_biases);
  out.dense = DenseLayer<U>{model.dense.in_dim, model.dense.out_dim, cast_vector<U, T>(model.dense.weights),
                            cast_vector<U, T>(model.dense.biases), model.dense.activation};
  out.class_labels = model.class_labels;
  return out;
}

template <typename T>
CnnMask sample_cnn_mask(const BasicCnn<T>& model, Rng& rng) {
  return sample_keep_mask(model.shape().flattened, model.dropout_rate, rng);
}

template <typename T>
CnnActivations<T> cnn_forward_trace(const BasicCnn<T>& model, const LandmarkGrid& grid,
                                    const CnnMask* mask) {
  if (grid.size() != model.grid_size) {
    mismatch(fmt::format("grid is {}x{}, model expects {}", grid.size(), grid.size(), model.grid_size));
  }
  const auto s = model.shape();
  const bool dropout = mask != nullptr && !mask->empty();
  if (dropout && mask->size() != s.flattened) mismatch("dropout mask width");
  const int k = model.kernel;
  const auto F = static_cast<std::size_t>(s.filters);
  const auto C = static_cast<std::size_t>(s.conv);
  const auto P = static_cast<std::size_t>(s.pooled);

  CnnActivations<T> act;
  act.conv.resize(C * C * F);
  for (std::size_t pos = 0; pos < C * C; ++pos) {
    std::copy(model.conv_biases.begin(), model.conv_biases.end(), act.conv.begin() + pos * F);
  }
  // The input is a sparse occupancy grid, so scatter each set cell into the
  // outputs whose receptive field covers it.
  const int G = grid.size();
  for (int y = 0; y < G; ++y) {
    for (int x = 0; x < G; ++x) {
      const auto v = static_cast<T>(grid.at(y, x));
      if (v == T{0}) continue;
      for (int kr = 0; kr < k; ++kr) {
        const int r = y - kr;
        if (r < 0 || r >= s.conv) continue;
        for (int kc = 0; kc < k; ++kc) {
          const int c = x - kc;
          if (c < 0 || c >= s.conv) continue;
          T* out = act.conv.data() + (static_cast<std::size_t>(r) * C + static_cast<std::size_t>(c)) * F;
          for (std::size_t f = 0; f < F; ++f) {
            out[f] += model.conv_weights[(f * k + kr) * k + kc] * v;
          }
        }
      }
    }
  }
  for (auto& v : act.conv) v = std::max(v, T{0});

  act.pooled.assign(P * P * F, T{0});
  act.pool_argmax.assign(P * P * F, 0);
  const T scale = dropout ? static_cast<T>(1.0 / (1.0 - model.dropout_rate)) : T{1};
  const auto pool = static_cast<std::size_t>(model.pool);
  for (std::size_t pr = 0; pr < P; ++pr) {
    for (std::size_t pc = 0; pc < P; ++pc) {
      for (std::size_t f = 0; f < F; ++f) {
        std::size_t best = ((pr * pool) * C + pc * pool) * F + f;
        for (std::size_t i = 0; i < pool; ++i) {
          for (std::size_t j = 0; j < pool; ++j) {
            const std::size_t idx = ((pr * pool + i) * C + pc * pool + j) * F + f;
            if (act.conv[idx] > act.conv[best]) best = idx;
          }
        }
        const std::size_t u = (pr * P + pc) * F + f;
        act.pool_argmax[u] = best;
        T v = act.conv[best];
        if (dropout) v = (*mask)[u] ? v * scale : T{0};
        act.pooled[u] = v;
      }
    }
  }

  const auto& d = model.dense;
  act.probs = d.biases;
  for (std::size_t o = 0; o < d.out_dim; ++o) {
    const T* row = d.weights.data() + o * d.in_dim;
    T acc = 0;
    for (std::size_t i = 0; i < d.in_dim; ++i) acc += row[i] * act.pooled[i];
    act.probs[o] += acc;
  }
  softmax_inplace<T>(act.probs);
  return act;
}

template <typename T>
std::vector<T> cnn_forward(const BasicCnn<T>& model, const LandmarkGrid& grid, const CnnMask* mask) {
  return cnn_forward_trace(model, grid, mask).probs;
}

template <typename T>
ParamBuffers<T> cnn_backward(const BasicCnn<T>& model, std::span<const LandmarkGrid* const> grids,
                             std::span<const std::size_t> labels, std::span<const CnnMask> masks,
                             BatchStats* stats) {
  if (grids.empty()) throw Error(ErrorKind::EmptyDataset, "empty batch");
  if (labels.size() != grids.size()) mismatch("one label per input required");
  if (!masks.empty() && masks.size() != grids.size()) mismatch("one dropout mask per input required");

  const auto s = model.shape();
  const int k = model.kernel;
  const auto F = static_cast<std::size_t>(s.filters);
  const auto C = static_cast<std::size_t>(s.conv);
  const auto& d = model.dense;

  ParamBuffers<T> grads;
  grads.emplace_back(model.conv_weights.size(), T{0});
  grads.emplace_back(model.conv_biases.size(), T{0});
  grads.emplace_back(d.weights.size(), T{0});
  grads.emplace_back(d.biases.size(), T{0});
  auto& g_cw = grads[0];
  auto& g_cb = grads[1];
  auto& g_dw = grads[2];
  auto& g_db = grads[3];
  const T inv_batch = T{1} / static_cast<T>(grids.size());
  double loss = 0.0;
  std::size_t correct = 0;

  for (std::size_t n = 0; n < grids.size(); ++n) {
    const CnnMask* mask = masks.empty() ? nullptr : &masks[n];
    const bool dropout = mask != nullptr && !mask->empty();
    const LandmarkGrid& grid = *grids[n];
    const auto act = cnn_forward_trace(model, grid, mask);
    if (labels[n] >= d.out_dim) throw Error(ErrorKind::IndexOutOfRange, "label out of range");
    loss += cross_entropy<T>(act.probs, labels[n]);
    if (argmax<T>(act.probs) == labels[n]) ++correct;

    std::vector<T> delta(act.probs);
    delta[labels[n]] -= T{1};
    for (auto& v : delta) v *= inv_batch;

    std::vector<T> g_pooled(d.in_dim, T{0});
    for (std::size_t o = 0; o < d.out_dim; ++o) {
      const T dv = delta[o];
      g_db[o] += dv;
      T* grow = g_dw.data() + o * d.in_dim;
      const T* wrow = d.weights.data() + o * d.in_dim;
      for (std::size_t i = 0; i < d.in_dim; ++i) {
        grow[i] += dv * act.pooled[i];
        g_pooled[i] += wrow[i] * dv;
      }
    }

    const T scale = dropout ? static_cast<T>(1.0 / (1.0 - model.dropout_rate)) : T{1};
    for (std::size_t u = 0; u < g_pooled.size(); ++u) {
      T gu = g_pooled[u];
      if (dropout) gu = (*mask)[u] ? gu * scale : T{0};
      const std::size_t idx = act.pool_argmax[u];
      // relu gate: inactive units pass no gradient.
      if (gu == T{0} || act.conv[idx] <= T{0}) continue;
      const std::size_t f = idx % F;
      const std::size_t pos = idx / F;
      const auto r = static_cast<int>(pos / C);
      const auto c = static_cast<int>(pos % C);
      g_cb[f] += gu;
      for (int kr = 0; kr < k; ++kr) {
        for (int kc = 0; kc < k; ++kc) {
          const auto v = static_cast<T>(grid.at(r + kr, c + kc));
          if (v != T{0}) g_cw[(f * k + kr) * k + kc] += gu * v;
        }
      }
    }
  }
  if (stats != nullptr) *stats = {loss / static_cast<double>(grids.size()), correct};
  return grads;
}

template <typename T>
double cnn_batch_loss(const BasicCnn<T>& model, std::span<const LandmarkGrid* const> grids,
                      std::span<const std::size_t> labels, std::span<const CnnMask> masks) {
  if (grids.empty()) throw Error(ErrorKind::EmptyDataset, "empty batch");
  double loss = 0.0;
  for (std::size_t n = 0; n < grids.size(); ++n) {
    const CnnMask* mask = masks.empty() ? nullptr : &masks[n];
    loss += cross_entropy<T>(cnn_forward(model, *grids[n], mask), labels[n]);
  }
  return loss / static_cast<double>(grids.size());
}

#define EMOPIPE_INSTANTIATE(T)                                                                     \
  template struct BasicCnn<T>;                                                                     \
  template CnnMask sample_cnn_mask<T>(const BasicCnn<T>&, Rng&);                                   \
  template CnnActivations<T> cnn_forward_trace<T>(const BasicCnn<T>&, const LandmarkGrid&,         \
                                                  const CnnMask*);                                 \
  template std::vector<T> cnn_forward<T>(const BasicCnn<T>&, const LandmarkGrid&, const CnnMask*); \
  template ParamBuffers<T> cnn_backward<T>(const BasicCnn<T>&, std::span<const LandmarkGrid* const>, \
                                           std::span<const std::size_t>, std::span<const CnnMask>,  \
                                           BatchStats*);                                               \
  template double cnn_batch_loss<T>(const BasicCnn<T>&, std::span<const LandmarkGrid* const>,      \
                                    std::span<const std::size_t>, std::span<const CnnMask>);

EMOPIPE_INSTANTIATE(float)
EMOPIPE_INSTANTIATE(double)
#undef EMOPIPE_INSTANTIATE

template BasicCnn<double> convert_cnn<double, float>(const BasicCnn<float>&);
template BasicCnn<float> convert_cnn<float, double>(const BasicCnn<double>&);

}  // namespace emopipe::nn
