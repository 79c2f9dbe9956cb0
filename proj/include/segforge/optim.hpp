#pragma once

#include <cstdint>
#include <vector>

#include "segforge/losses.hpp"
#include "segforge/unet.hpp"

namespace segforge {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 2;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LossKind loss = LossKind::bce_plus_dice;
  std::uint64_t seed = 0;

  void validate() const;
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::int64_t step = 0;

  static AdamState zeros_like(const ModelParams<T>& params);
};

// One bias-corrected Adam update:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
template <typename T>
void adam_step(ModelParams<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               const TrainConfig& config);

}  // namespace segforge
