#include "emopipe/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "emopipe/error.hpp"

namespace emopipe::nn {
namespace {

void check_sets(std::size_t n_inputs, std::size_t n_labels, const char* name) {
  if (n_inputs != n_labels) {
    throw Error(ErrorKind::DimensionMismatch, fmt::format("{} set: {} inputs, {} labels", name, n_inputs, n_labels));
  }
}

// Per-architecture hooks for the shared epoch loop.
struct MlpOps {
  using Model = MlpModel;
  using Data = FeatureTensors;
  using Mask = MlpMask;

  static Mask sample(const Model& m, Rng& rng) { return sample_mlp_mask(m, rng); }

  static ParamBuffers<float> backward(const Model& m, const Data& d, std::span<const std::size_t> rows,
                                      std::span<const Mask> masks, BatchStats* stats) {
    std::vector<std::span<const float>> xs;
    std::vector<std::size_t> ys;
    for (auto r : rows) {
      xs.emplace_back(d.inputs[r]);
      ys.push_back(d.labels[r]);
    }
    return mlp_backward<float>(m, xs, ys, masks, stats);
  }

  static std::vector<float> infer(const Model& m, const Data& d, std::size_t row) {
    return mlp_forward<float>(m, d.inputs[row]);
  }

  static void check(const Model& m, const Data& d, const char* name) {
    check_sets(d.inputs.size(), d.labels.size(), name);
    for (const auto& x : d.inputs) {
      if (x.size() != m.input_dim()) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("{} row has {} features, model expects {}", name, x.size(), m.input_dim()));
      }
    }
  }
};

struct CnnOps {
  using Model = CnnModel;
  using Data = GridTensors;
  using Mask = CnnMask;

  static Mask sample(const Model& m, Rng& rng) { return sample_cnn_mask(m, rng); }

  static ParamBuffers<float> backward(const Model& m, const Data& d, std::span<const std::size_t> rows,
                                      std::span<const Mask> masks, BatchStats* stats) {
    std::vector<const LandmarkGrid*> xs;
    std::vector<std::size_t> ys;
    for (auto r : rows) {
      xs.push_back(&d.inputs[r]);
      ys.push_back(d.labels[r]);
    }
    return cnn_backward<float>(m, xs, ys, masks, stats);
  }

  static std::vector<float> infer(const Model& m, const Data& d, std::size_t row) {
    return cnn_forward<float>(m, d.inputs[row]);
  }

  static void check(const Model& m, const Data& d, const char* name) {
    check_sets(d.inputs.size(), d.labels.size(), name);
    for (const auto& g : d.inputs) {
      if (g.size() != m.grid_size) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("{} grid is {}, model expects {}", name, g.size(), m.grid_size));
      }
    }
  }
};

template <typename Ops>
double accuracy_impl(const typename Ops::Model& model, const typename Ops::Data& data) {
  if (data.labels.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    const auto probs = Ops::infer(model, data, i);
    if (argmax<float>(probs) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.labels.size());
}

template <typename Ops>
TrainHistory train_impl(typename Ops::Model& model, const typename Ops::Data& train_set,
                        const typename Ops::Data& val_set, const TrainConfig& config,
                        const EpochCallback& on_epoch) {
  if (train_set.inputs.empty()) throw Error(ErrorKind::EmptyDataset, "training set is empty");
  if (config.batch_size == 0) throw Error(ErrorKind::DimensionMismatch, "batch size must be positive");
  model.validate();
  Ops::check(model, train_set, "training");
  Ops::check(model, val_set, "validation");

  Rng rng(config.seed);
  auto params = model.parameters();
  auto adam = make_adam_state<float>(params, config.adam);
  std::vector<std::size_t> order(train_set.inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      std::vector<typename Ops::Mask> masks;
      masks.reserve(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) masks.push_back(Ops::sample(model, rng));

      BatchStats stats;
      const auto grads = Ops::backward(model, train_set, rows, masks, &stats);
      adam_step<float>(params, grads, adam);
      loss_sum += stats.mean_loss * static_cast<double>(rows.size());
      hits += stats.correct;
    }
    const auto n = static_cast<double>(order.size());
    EpochStats es{loss_sum / n, static_cast<double>(hits) / n, accuracy_impl<Ops>(model, val_set)};
    history.push_back(es);
    if (on_epoch) on_epoch(epoch, es);
  }
  return history;
}

}  // namespace

TrainHistory train(MlpModel& model, const FeatureTensors& train_set, const FeatureTensors& val_set,
                   const TrainConfig& config, const EpochCallback& on_epoch) {
  return train_impl<MlpOps>(model, train_set, val_set, config, on_epoch);
}

TrainHistory train(CnnModel& model, const GridTensors& train_set, const GridTensors& val_set,
                   const TrainConfig& config, const EpochCallback& on_epoch) {
  return train_impl<CnnOps>(model, train_set, val_set, config, on_epoch);
}

double accuracy(const MlpModel& model, const FeatureTensors& data) {
  return accuracy_impl<MlpOps>(model, data);
}

double accuracy(const CnnModel& model, const GridTensors& data) {
  return accuracy_impl<CnnOps>(model, data);
}

}  // namespace emopipe::nn
