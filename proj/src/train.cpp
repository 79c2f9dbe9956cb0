#include "segforge/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace segforge {

template <typename T>
std::pair<Tensor<T>, Tensor<T>> make_batch(const std::vector<Sample>& samples,
                                           const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw runtime_error("make_batch: empty batch");
  const Sample& first = samples.at(indices.front());
  const int h = first.image.height(), w = first.image.width();
  const auto n = static_cast<std::int64_t>(indices.size());
  Tensor<T> x(Shape::nchw(n, 1, h, w)), t(Shape::nchw(n, 1, h, w));
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Sample& s = samples.at(indices[b]);
    validate_sample(s);
    if (s.image.height() != h || s.image.width() != w)
      throw ShapeError("make_batch sample " + s.id, "height x width",
                       std::to_string(h) + "x" + std::to_string(w) + " expected, got " +
                           std::to_string(s.image.height()) + "x" + std::to_string(s.image.width()));
    T* xd = x.data() + b * plane;
    T* td = t.data() + b * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      xd[i] = static_cast<T>(s.image[i]);
      td[i] = s.mask[i] ? T(1) : T(0);
    }
  }
  return {std::move(x), std::move(t)};
}

template <typename T>
double loss_and_gradients(const ModelParams<T>& params, const Tensor<T>& x, const Tensor<T>& truth,
                          LossKind loss, std::vector<Tensor<T>>& grads) {
  ad::Tape<T> tape;
  const auto vars = attach(tape, params, true);
  const auto prob = unet_forward(params.config, vars, tape.constant(x));
  const auto l = segmentation_loss(loss, prob, truth);
  const double value = static_cast<double>(l.value()[0]);
  tape.backward(l);
  grads.clear();
  grads.reserve(vars.size());
  for (const auto& v : vars) grads.push_back(v.grad());
  return value;
}

template <typename T>
TrainResult<T> train(ModelParams<T> params, const std::vector<Sample>& train_set,
                     const std::vector<Sample>& val_set, const TrainConfig& config,
                     const PostprocessConfig& pp, const TrainCallbacks& callbacks) {
  config.validate();
  params.config.validate();
  if (train_set.empty()) throw data_error("training set is empty");
  for (const auto* set : {&train_set, &val_set})
    for (const auto& s : *set) {
      validate_sample(s);
      if (s.image.height() != params.config.input_h || s.image.width() != params.config.input_w)
        throw ShapeError("train sample " + s.id, "height x width",
                         std::to_string(params.config.input_h) + "x" + std::to_string(params.config.input_w) +
                             " expected, got " + std::to_string(s.image.height()) + "x" +
                             std::to_string(s.image.width()));
    }

  TrainResult<T> result;
  AdamState<T> state = AdamState<T>::zeros_like(params);
  std::vector<Tensor<T>> grads;
  std::vector<std::size_t> order(train_set.size());
  double best = -std::numeric_limits<double>::infinity();
  std::int64_t step = 0;
  const auto bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x7a11u};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + bs)));
      const auto [x, t] = make_batch<T>(train_set, idx);
      const double l = loss_and_gradients(params, x, t, config.loss, grads);
      if (!std::isfinite(l)) throw runtime_error("training diverged: loss is not finite at epoch " + std::to_string(epoch));
      adam_step(params, grads, state, config);
      loss_sum += l;
      ++batches;
      ++step;
      if (callbacks.on_step) callbacks.on_step(step, l);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / batches;
    rec.val_dice_raw = rec.val_dice_post = std::numeric_limits<double>::quiet_NaN();
    if (!val_set.empty()) {
      const EvalResult r = evaluate(val_set, model_predictor(params), pp);
      rec.val_dice_raw = r.raw.mean_dice;
      rec.val_dice_post = r.post.mean_dice;
      if (rec.val_dice_post > best) {
        best = rec.val_dice_post;
        result.best_params = params;
        result.best_epoch = epoch;
      }
    }
    result.history.push_back(rec);
    if (callbacks.on_epoch) callbacks.on_epoch(rec);
  }

  if (val_set.empty()) {
    result.best_params = params;
    result.best_epoch = config.epochs;
  }
  result.final_params = std::move(params);
  return result;
}

#define SEGFORGE_INSTANTIATE_TRAIN(T)                                                                   \
  template std::pair<Tensor<T>, Tensor<T>> make_batch<T>(const std::vector<Sample>&,                   \
                                                         const std::vector<std::size_t>&);             \
  template double loss_and_gradients<T>(const ModelParams<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                        LossKind, std::vector<Tensor<T>>&);                            \
  template TrainResult<T> train<T>(ModelParams<T>, const std::vector<Sample>&, const std::vector<Sample>&, \
                                   const TrainConfig&, const PostprocessConfig&, const TrainCallbacks&);

SEGFORGE_INSTANTIATE_TRAIN(float)
SEGFORGE_INSTANTIATE_TRAIN(double)

}  // namespace segforge
