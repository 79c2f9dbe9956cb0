#pragma once

#include <string>

#include "segforge/autodiff.hpp"

namespace segforge {

enum class LossKind { bce, soft_dice, bce_plus_dice };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& s);

// Per batch item: 1 - (2 Σ p t + eps) / (Σ p + Σ t + eps), averaged over the
// batch. prob and truth: (n, 1, h, w).
template <typename T>
ad::Var<T> soft_dice_loss(ad::Var<T> prob, const Tensor<T>& truth, T eps = T(1));

// Mean of -[t ln p + (1-t) ln(1-p)] with p clamped to [1e-7, 1-1e-7]. The
// gradient is zero where the clamp is active.
template <typename T>
ad::Var<T> bce_loss(ad::Var<T> prob, const Tensor<T>& truth);

template <typename T>
ad::Var<T> segmentation_loss(LossKind kind, ad::Var<T> prob, const Tensor<T>& truth);

}  // namespace segforge
