#pragma once

#include <cstdint>
#include <vector>

#include "faultguard/dataset.hpp"
#include "faultguard/layers.hpp"

namespace fg {

struct TrainConfig {
  float lr = 0.05f;
  float momentum = 0.9f;
  int epochs = 3;
  int batch = 32;
  uint64_t seed = 1;
  float lr_decay = 1.0f;  // per-epoch multiplier
};

struct TrainResult {
  ModelGraph model;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
  double test_accuracy = -1.0;     // -1 when no test set was supplied
};

/// Mini-batch SGD with momentum on softmax cross-entropy. Deterministic
/// given cfg.seed. Softmax layers are inference-only; the chain trained
/// here must end in logits. Throws TrainingError (with the epoch index)
/// if the loss goes non-finite.
TrainResult train_target(const ModelGraph& init, const DatasetView& train,
                         const DatasetView* test, const TrainConfig& cfg);

/// Top-1 accuracy of the model over the dataset.
double evaluate_accuracy(const ModelGraph& model, const DatasetView& data);

/// Mean cross-entropy of the model's logits over the dataset.
double mean_cross_entropy(const ModelGraph& model, const DatasetView& data);

}  // namespace fg
