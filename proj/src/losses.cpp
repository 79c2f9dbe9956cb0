#include "segforge/losses.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

namespace segforge {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::bce: return "bce";
    case LossKind::soft_dice: return "soft_dice";
    case LossKind::bce_plus_dice: return "bce_plus_dice";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "bce") return LossKind::bce;
  if (s == "soft_dice" || s == "dice") return LossKind::soft_dice;
  if (s == "bce_plus_dice" || s == "bce+dice") return LossKind::bce_plus_dice;
  throw usage_error("unknown loss '" + s + "' (expected bce|soft_dice|bce_plus_dice)");
}

namespace {

template <typename T>
void check_pair(const ad::Var<T>& prob, const Tensor<T>& truth, const char* op) {
  const Shape& p = prob.shape();
  require_rank4(p, op);
  const Shape& t = truth.shape();
  require_rank4(t, op);
  const char* names[4] = {"batch", "channels", "height", "width"};
  for (int i = 0; i < 4; ++i)
    if (p[i] != t[i]) throw ShapeError(op, names[i], p[i], t[i]);
}

template <typename T>
Tensor<T> scalar(T v) {
  return Tensor<T>(Shape::nchw(1, 1, 1, 1), v);
}

}  // namespace

template <typename T>
ad::Var<T> soft_dice_loss(ad::Var<T> prob, const Tensor<T>& truth, T eps) {
  check_pair(prob, truth, "soft_dice_loss");
  const auto& p = prob.value();
  const std::int64_t n = p.shape().n();
  const std::int64_t per = p.numel() / std::max<std::int64_t>(n, 1);
  // per item: intersection, denominator
  auto stats = std::make_shared<std::vector<T>>(static_cast<std::size_t>(2 * n));
  T total = T(0);
  for (std::int64_t b = 0; b < n; ++b) {
    T inter = T(0), sp = T(0), st = T(0);
    const T* pb = p.data() + b * per;
    const T* tb = truth.data() + b * per;
    for (std::int64_t i = 0; i < per; ++i) {
      inter += pb[i] * tb[i];
      sp += pb[i];
      st += tb[i];
    }
    const T denom = sp + st + eps;
    (*stats)[static_cast<std::size_t>(2 * b)] = T(2) * inter + eps;
    (*stats)[static_cast<std::size_t>(2 * b + 1)] = denom;
    total += T(1) - (T(2) * inter + eps) / denom;
  }
  const int pi = prob.id();
  auto t = std::make_shared<const Tensor<T>>(truth);
  return prob.tape().record(
      ad::OpKind::soft_dice_loss, {pi}, scalar<T>(total / static_cast<T>(n)),
      [pi, t, stats, n, per](ad::Tape<T>& tape, const Tensor<T>& g) {
        auto& dp = tape.grad_buffer(pi);
        for (std::int64_t b = 0; b < n; ++b) {
          const T num = (*stats)[static_cast<std::size_t>(2 * b)];
          const T den = (*stats)[static_cast<std::size_t>(2 * b + 1)];
          const T k = g[0] / (static_cast<T>(n) * den * den);
          const T* tb = t->data() + b * per;
          T* db = dp.data() + b * per;
          for (std::int64_t i = 0; i < per; ++i) db[i] -= k * (T(2) * tb[i] * den - num);
        }
      });
}

template <typename T>
ad::Var<T> bce_loss(ad::Var<T> prob, const Tensor<T>& truth) {
  check_pair(prob, truth, "bce_loss");
  constexpr T lo = T(1e-7);
  constexpr T hi = T(1) - T(1e-7);
  const auto& p = prob.value();
  const std::int64_t count = p.numel();
  T total = T(0);
  for (std::int64_t i = 0; i < count; ++i) {
    const T pc = std::clamp(p[i], lo, hi);
    const T t = truth[i];
    total -= t * std::log(pc) + (T(1) - t) * std::log(T(1) - pc);
  }
  const int pi = prob.id();
  auto t = std::make_shared<const Tensor<T>>(truth);
  return prob.tape().record(
      ad::OpKind::bce_loss, {pi}, scalar<T>(total / static_cast<T>(count)),
      [pi, t, count](ad::Tape<T>& tape, const Tensor<T>& g) {
        const auto& pv = tape.value(pi);
        auto& dp = tape.grad_buffer(pi);
        const T k = g[0] / static_cast<T>(count);
        for (std::int64_t i = 0; i < count; ++i) {
          const T pc = pv[i];
          if (pc < lo || pc > hi) continue;
          const T tv = (*t)[i];
          dp[i] += k * (-tv / pc + (T(1) - tv) / (T(1) - pc));
        }
      });
}

template <typename T>
ad::Var<T> segmentation_loss(LossKind kind, ad::Var<T> prob, const Tensor<T>& truth) {
  switch (kind) {
    case LossKind::bce: return bce_loss(prob, truth);
    case LossKind::soft_dice: return soft_dice_loss(prob, truth);
    case LossKind::bce_plus_dice: return ad::add(bce_loss(prob, truth), soft_dice_loss(prob, truth));
  }
  throw runtime_error("segmentation_loss: unknown loss kind");
}

template ad::Var<float> soft_dice_loss<float>(ad::Var<float>, const Tensor<float>&, float);
template ad::Var<double> soft_dice_loss<double>(ad::Var<double>, const Tensor<double>&, double);
template ad::Var<float> bce_loss<float>(ad::Var<float>, const Tensor<float>&);
template ad::Var<double> bce_loss<double>(ad::Var<double>, const Tensor<double>&);
template ad::Var<float> segmentation_loss<float>(LossKind, ad::Var<float>, const Tensor<float>&);
template ad::Var<double> segmentation_loss<double>(LossKind, ad::Var<double>, const Tensor<double>&);

}  // namespace segforge
