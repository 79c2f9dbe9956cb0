#pragma once
// Reverse-mode automatic differentiation over rank-4 tensors.
//
// A Tape records every operation whose inputs require gradients, together
// with a closure that propagates the upstream gradient to those inputs.
// Nodes are appended in execution order, so the node list is always a valid
// topological order and backward() is a single reverse sweep.
//
// A Tape and the Vars that point into it are a single-threaded unit.
// Independent tapes can be used from different threads.

#include <deque>
#include <functional>
#include <limits>
#include <string_view>
#include <vector>

#include "segforge/tensor.hpp"

namespace segforge::ad {

enum class OpKind {
  leaf,
  conv2d,
  conv2d_relu,
  relu,
  sigmoid,
  maxpool2x2,
  upsample_nearest2x,
  concat_channels,
  sum,
  mean,
  add,
  scale,
  weighted_sum,
  soft_dice_loss,
  bce_loss,
};

std::string_view op_name(OpKind kind);

enum class Padding { same, valid };

template <typename T>
class Tape;

// Handle to a node on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  // Gradient after backward(); zeros if the node was not reached.
  Tensor<T> grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = false);
  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  // Appends an op node. The backward closure is dropped when no input
  // requires a gradient.
  Var<T> record(OpKind kind, std::vector<int> inputs, Tensor<T> value, BackwardFn backward);

  const Tensor<T>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  OpKind kind(int id) const { return nodes_[static_cast<std::size_t>(id)].kind; }
  const std::vector<int>& inputs(int id) const {
    return nodes_[static_cast<std::size_t>(id)].inputs;
  }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Accumulation buffer for node id, zero-initialized on first access.
  Tensor<T>& grad_buffer(int id);
  Tensor<T> grad(int id) const;
  bool has_grad(int id) const;

  // Reverse sweep from a scalar (numel == 1) loss. Afterwards every
  // requires_grad leaf holds a gradient of its own shape (zeros when the
  // loss does not depend on it). Intermediate gradients are released.
  void backward(Var<T> loss);

  // Kink tracking: when enabled, relu records min |x| and maxpool records the
  // smallest gap between a window's max and runner-up. Gradient checks use
  // this to reject instances sitting on a non-differentiable point.
  void set_track_kinks(bool on) { track_kinks_ = on; }
  bool track_kinks() const noexcept { return track_kinks_; }
  void note_kink(double margin) {
    if (margin < kink_margin_) kink_margin_ = margin;
  }
  double kink_margin() const noexcept { return kink_margin_; }

 private:
  struct Node {
    OpKind kind;
    std::vector<int> inputs;
    Tensor<T> value;
    bool requires_grad;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;  // stable addresses: Var::value() hands out references
  std::deque<Tensor<T>> grads_;
  bool track_kinks_ = false;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

// ---- ops -------------------------------------------------------------------

// weight: (co, ci, kh, kw); bias: rank 1 (co). Stride 1. Same padding
// requires odd kernel sides and zero-pads so h,w are preserved.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, Padding padding = Padding::same);

// relu(conv2d(...)) as one node; the pre-activation is not kept.
template <typename T>
Var<T> conv2d_relu(Var<T> x, Var<T> weight, Var<T> bias, Padding padding = Padding::same);

template <typename T>
Var<T> relu(Var<T> x);

template <typename T>
Var<T> sigmoid(Var<T> x);

// Gradient goes to the first max of each window in row-major order.
template <typename T>
Var<T> maxpool2x2(Var<T> x);

template <typename T>
Var<T> upsample_nearest2x(Var<T> x);

// Channels of a, then channels of b. n, h, w must match.
template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b);

// Scalar reductions produce shape (1,1,1,1).
template <typename T>
Var<T> sum(Var<T> x);

template <typename T>
Var<T> mean(Var<T> x);

// Σ x ⊙ weights, with weights a constant of x's shape.
template <typename T>
Var<T> weighted_sum(Var<T> x, const Tensor<T>& weights);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> scale(Var<T> x, T factor);

// ---- raw kernels (no tape) ------------------------------------------------

namespace detail {

// out: (n, co, h + 2*pad_h - kh + 1, w + 2*pad_w - kw + 1). bias may be null.
template <typename T>
void conv_forward(const Tensor<T>& x, const Tensor<T>& weight, const T* bias, int pad_h,
                  int pad_w, Tensor<T>& out);

// Accumulates dweight (co,ci,kh,kw) and dbias (co) given the upstream grad.
template <typename T>
void conv_backward_params(const Tensor<T>& x, const Tensor<T>& dout, int pad_h, int pad_w,
                          Tensor<T>* dweight, Tensor<T>* dbias);

// Accumulates dx given the upstream grad.
template <typename T>
void conv_backward_input(const Tensor<T>& dout, const Tensor<T>& weight, int pad_h, int pad_w,
                         Tensor<T>& dx);

}  // namespace detail

}  // namespace segforge::ad
