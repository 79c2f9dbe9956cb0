#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "segforge/dataset.hpp"
#include "segforge/evaluate.hpp"
#include "segforge/optim.hpp"

namespace segforge {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  // NaN when there is no validation set
  double val_dice_raw = 0.0;
  double val_dice_post = 0.0;
};

struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(std::int64_t step, double loss)> on_step;
};

template <typename T>
struct TrainResult {
  ModelParams<T> final_params;
  // Highest postprocessed validation dice (earliest epoch wins ties); the
  // final parameters when there is no validation set.
  ModelParams<T> best_params;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

// Packs samples[indices] into (n,1,h,w) image and mask tensors.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> make_batch(const std::vector<Sample>& samples,
                                           const std::vector<std::size_t>& indices);

// Loss of one batch, with parameter gradients in `grads` (same order as params).
template <typename T>
double loss_and_gradients(const ModelParams<T>& params, const Tensor<T>& x, const Tensor<T>& truth,
                          LossKind loss, std::vector<Tensor<T>>& grads);

// Every sample must already be at the model's input size. Each epoch visits
// the training samples in an order shuffled from (seed, epoch).
template <typename T>
TrainResult<T> train(ModelParams<T> params, const std::vector<Sample>& train_set,
                     const std::vector<Sample>& val_set, const TrainConfig& config,
                     const PostprocessConfig& pp, const TrainCallbacks& callbacks = {});

}  // namespace segforge
