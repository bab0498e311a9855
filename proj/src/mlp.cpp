#include "emopipe/nn/mlp.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "emopipe/error.hpp"

namespace emopipe::nn {
namespace {

[[noreturn]] void mismatch(const std::string& what) { throw Error(ErrorKind::DimensionMismatch, what); }

// Per-layer activations of one forward pass, kept for backprop.
template <typename T>
struct Trace {
  std::vector<std::vector<T>> inputs;  // input to each layer (post-dropout for hidden)
  std::vector<std::vector<T>> pre;     // pre-activation z of each layer
  std::vector<T> probs;
};

template <typename T>
void check_mask(const BasicMlp<T>& model, const MlpMask* mask) {
  if (mask == nullptr || mask->empty()) return;
  if (mask->size() + 1 != model.layers.size()) mismatch("dropout mask layer count");
  for (std::size_t l = 0; l < mask->size(); ++l) {
    if ((*mask)[l].size() != model.layers[l].out_dim) mismatch("dropout mask width");
  }
}

template <typename T>
Trace<T> forward_trace(const BasicMlp<T>& model, std::span<const T> x, const MlpMask* mask) {
  if (model.layers.empty()) mismatch("model has no layers");
  if (x.size() != model.input_dim()) {
    mismatch(fmt::format("input has {} values, model expects {}", x.size(), model.input_dim()));
  }
  check_mask(model, mask);
  const bool dropout = mask != nullptr && !mask->empty();

  Trace<T> tr;
  tr.inputs.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const auto& a = tr.inputs.back();
    std::vector<T> z(layer.biases);
    for (std::size_t o = 0; o < layer.out_dim; ++o) {
      const T* row = layer.weights.data() + o * layer.in_dim;
      T acc = 0;
      for (std::size_t i = 0; i < layer.in_dim; ++i) acc += row[i] * a[i];
      z[o] += acc;
    }
    tr.pre.push_back(z);
    if (layer.activation == Activation::Softmax) {
      softmax_inplace<T>(z);
      tr.probs = std::move(z);
    } else {
      const T scale = dropout ? static_cast<T>(1.0 / (1.0 - model.dropout_rates[l])) : T{1};
      for (std::size_t o = 0; o < z.size(); ++o) {
        T h = std::max(z[o], T{0});
        if (dropout) h = (*mask)[l][o] ? h * scale : T{0};
        z[o] = h;
      }
      tr.inputs.push_back(std::move(z));
    }
  }
  return tr;
}

}  // namespace

template <typename T>
std::size_t BasicMlp<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

template <typename T>
void BasicMlp<T>::validate() const {
  if (layers.empty()) mismatch("model has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weights.size() != layer.in_dim * layer.out_dim || layer.biases.size() != layer.out_dim) {
      mismatch(fmt::format("layer {} parameter sizes do not match {}x{}", l, layer.out_dim, layer.in_dim));
    }
    if (l + 1 < layers.size()) {
      if (layers[l + 1].in_dim != layer.out_dim) mismatch(fmt::format("layer {} -> {} dims do not chain", l, l + 1));
      if (layer.activation != Activation::Relu) mismatch("hidden layers must use relu");
    } else if (layer.activation != Activation::Softmax) {
      mismatch("output layer must use softmax");
    }
  }
  if (dropout_rates.size() + 1 != layers.size()) mismatch("one dropout rate per hidden layer required");
  for (double r : dropout_rates) {
    if (!(r >= 0.0 && r < 1.0)) mismatch(fmt::format("dropout rate {} outside [0,1)", r));
  }
  if (!class_labels.empty() && class_labels.size() != output_dim()) {
    mismatch(fmt::format("{} class labels for {} outputs", class_labels.size(), output_dim()));
  }
}

template <typename T>
ParamViews<T> BasicMlp<T>::parameters() {
  ParamViews<T> out;
  for (auto& l : layers) {
    out.emplace_back(l.weights);
    out.emplace_back(l.biases);
  }
  return out;
}

template <typename T>
ParamViews<const T> BasicMlp<T>::parameters() const {
  ParamViews<const T> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weights);
    out.emplace_back(l.biases);
  }
  return out;
}

MlpModel make_mlp(const std::vector<std::size_t>& dims, double dropout_rate,
                  std::vector<std::string> class_labels, std::uint64_t seed) {
  if (dims.size() < 2) mismatch("an MLP needs at least input and output widths");
  Rng rng(seed);
  MlpModel m;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer<float> layer;
    layer.in_dim = dims[l];
    layer.out_dim = dims[l + 1];
    layer.weights.resize(layer.in_dim * layer.out_dim);
    layer.biases.assign(layer.out_dim, 0.0f);
    layer.activation = l + 2 == dims.size() ? Activation::Softmax : Activation::Relu;
    glorot_uniform<float>(layer.weights, layer.in_dim, layer.out_dim, rng);
    m.layers.push_back(std::move(layer));
  }
  m.dropout_rates.assign(dims.size() - 2, dropout_rate);
  m.class_labels = std::move(class_labels);
  m.validate();
  return m;
}

MlpModel make_default_mlp(std::size_t input_dim, std::uint64_t seed) {
  return make_mlp({input_dim, 1024, 512, 256, 2}, 0.5, default_class_labels(), seed);
}

template <typename U, typename T>
BasicMlp<U> convert_mlp(const BasicMlp<T>& model) {
  BasicMlp<U> out;
  out.dropout_rates = model.dropout_rates;
  out.class_labels = model.class_labels;
  for (const auto& l : model.layers) {
    out.layers.push_back(DenseLayer<U>{l.in_dim, l.out_dim, cast_vector<U, T>(l.weights),
                                       cast_vector<U, T>(l.biases), l.activation});
  }
  return out;
}

template <typename T>
MlpMask sample_mlp_mask(const BasicMlp<T>& model, Rng& rng) {
  MlpMask mask;
  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
    mask.push_back(sample_keep_mask(model.layers[l].out_dim, model.dropout_rates[l], rng));
  }
  return mask;
}

template <typename T>
std::vector<T> mlp_forward(const BasicMlp<T>& model, std::span<const T> x, const MlpMask* mask) {
  return forward_trace(model, x, mask).probs;
}

template <typename T>
ParamBuffers<T> mlp_backward(const BasicMlp<T>& model, std::span<const std::span<const T>> inputs,
                             std::span<const std::size_t> labels, std::span<const MlpMask> masks,
                             BatchStats* stats) {
  if (inputs.empty()) throw Error(ErrorKind::EmptyDataset, "empty batch");
  if (labels.size() != inputs.size()) mismatch("one label per input required");
  if (!masks.empty() && masks.size() != inputs.size()) mismatch("one dropout mask per input required");

  const std::size_t n_layers = model.layers.size();
  ParamBuffers<T> grads;
  for (const auto& l : model.layers) {
    grads.emplace_back(l.weights.size(), T{0});
    grads.emplace_back(l.biases.size(), T{0});
  }
  const T inv_batch = T{1} / static_cast<T>(inputs.size());
  double loss = 0.0;
  std::size_t correct = 0;

  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const MlpMask* mask = masks.empty() ? nullptr : &masks[s];
    const bool dropout = mask != nullptr && !mask->empty();
    const auto tr = forward_trace(model, inputs[s], mask);
    if (labels[s] >= model.output_dim()) {
      throw Error(ErrorKind::IndexOutOfRange, fmt::format("label {} out of range", labels[s]));
    }
    loss += cross_entropy<T>(tr.probs, labels[s]);
    if (argmax<T>(tr.probs) == labels[s]) ++correct;

    // dL/dz at the softmax output.
    std::vector<T> delta(tr.probs);
    delta[labels[s]] -= T{1};
    for (auto& d : delta) d *= inv_batch;

    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& layer = model.layers[l];
      const auto& a = tr.inputs[l];
      auto& gw = grads[2 * l];
      auto& gb = grads[2 * l + 1];
      for (std::size_t o = 0; o < layer.out_dim; ++o) {
        const T d = delta[o];
        gb[o] += d;
        if (d == T{0}) continue;
        T* row = gw.data() + o * layer.in_dim;
        for (std::size_t i = 0; i < layer.in_dim; ++i) row[i] += d * a[i];
      }
      if (l == 0) break;

      // Back through the previous hidden layer: dropout then relu.
      std::vector<T> prev(layer.in_dim, T{0});
      for (std::size_t o = 0; o < layer.out_dim; ++o) {
        const T d = delta[o];
        if (d == T{0}) continue;
        const T* row = layer.weights.data() + o * layer.in_dim;
        for (std::size_t i = 0; i < layer.in_dim; ++i) prev[i] += row[i] * d;
      }
      const auto& z = tr.pre[l - 1];
      const T scale = dropout ? static_cast<T>(1.0 / (1.0 - model.dropout_rates[l - 1])) : T{1};
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (z[i] <= T{0} || (dropout && !(*mask)[l - 1][i])) {
          prev[i] = T{0};
        } else if (dropout) {
          prev[i] *= scale;
        }
      }
      delta = std::move(prev);
    }
  }
  if (stats != nullptr) *stats = {loss / static_cast<double>(inputs.size()), correct};
  return grads;
}

template <typename T>
double mlp_batch_loss(const BasicMlp<T>& model, std::span<const std::span<const T>> inputs,
                      std::span<const std::size_t> labels, std::span<const MlpMask> masks) {
  if (inputs.empty()) throw Error(ErrorKind::EmptyDataset, "empty batch");
  double loss = 0.0;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const MlpMask* mask = masks.empty() ? nullptr : &masks[s];
    loss += cross_entropy<T>(mlp_forward(model, inputs[s], mask), labels[s]);
  }
  return loss / static_cast<double>(inputs.size());
}

#define EMOPIPE_INSTANTIATE(T)                                                                  \
  template struct BasicMlp<T>;                                                                  \
  template MlpMask sample_mlp_mask<T>(const BasicMlp<T>&, Rng&);                                \
  template std::vector<T> mlp_forward<T>(const BasicMlp<T>&, std::span<const T>, const MlpMask*); \
  template ParamBuffers<T> mlp_backward<T>(const BasicMlp<T>&, std::span<const std::span<const T>>, \
                                           std::span<const std::size_t>, std::span<const MlpMask>, \
                                           BatchStats*);                                            \
  template double mlp_batch_loss<T>(const BasicMlp<T>&, std::span<const std::span<const T>>,    \
                                    std::span<const std::size_t>, std::span<const MlpMask>);

EMOPIPE_INSTANTIATE(float)
EMOPIPE_INSTANTIATE(double)
#undef EMOPIPE_INSTANTIATE

template BasicMlp<double> convert_mlp<double, float>(const BasicMlp<float>&);
template BasicMlp<float> convert_mlp<float, double>(const BasicMlp<double>&);
template BasicMlp<float> convert_mlp<float, float>(const BasicMlp<float>&);

}  // namespace emopipe::nn
