#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "emopipe/features.hpp"
#include "emopipe/nn/adam.hpp"
#include "emopipe/nn/cnn.hpp"
#include "emopipe/nn/mlp.hpp"

namespace emopipe::nn {

/// Feature rows and their class indices, aligned by position.
struct FeatureTensors {
  std::vector<std::vector<float>> inputs;
  std::vector<std::size_t> labels;
};

struct GridTensors {
  std::vector<LandmarkGrid> inputs;
  std::vector<std::size_t> labels;
};

struct TrainConfig {
  std::size_t epochs = 5000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  AdamConfig adam{};
};

struct EpochStats {
  double train_loss = 0.0;      // mean train-mode loss over the epoch
  double train_accuracy = 0.0;  // train-mode argmax hits / rows
  double val_accuracy = 0.0;    // inference mode; NaN without a validation set
};

using TrainHistory = std::vector<EpochStats>;

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

/// Shuffled mini-batch training with Adam. Shuffling and dropout draw from a
/// single generator seeded by config.seed, so identical inputs give bitwise
/// identical weights and history. Throws EmptyDataset and DimensionMismatch.
TrainHistory train(MlpModel& model, const FeatureTensors& train_set, const FeatureTensors& val_set,
                   const TrainConfig& config, const EpochCallback& on_epoch = {});

TrainHistory train(CnnModel& model, const GridTensors& train_set, const GridTensors& val_set,
                   const TrainConfig& config, const EpochCallback& on_epoch = {});

double accuracy(const MlpModel& model, const FeatureTensors& data);
double accuracy(const CnnModel& model, const GridTensors& data);

}  // namespace emopipe::nn
