#include "segforge/autodiff.hpp"

namespace segforge::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::conv2d: return "conv2d";
    case OpKind::conv2d_relu: return "conv2d_relu";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::maxpool2x2: return "maxpool2x2";
    case OpKind::upsample_nearest2x: return "upsample_nearest2x";
    case OpKind::concat_channels: return "concat_channels";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::add: return "add";
    case OpKind::scale: return "scale";
    case OpKind::weighted_sum: return "weighted_sum";
    case OpKind::soft_dice_loss: return "soft_dice_loss";
    case OpKind::bce_loss: return "bce_loss";
  }
  return "?";
}

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

template <typename T>
Tensor<T> Var<T>::grad() const {
  return tape_->grad(id_);
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  nodes_.push_back(Node{OpKind::leaf, {}, std::move(value), requires_grad, {}});
  grads_.emplace_back();
  return Var<T>(this, static_cast<int>(nodes_.size() - 1));
}

template <typename T>
Var<T> Tape<T>::record(OpKind kind, std::vector<int> inputs, Tensor<T> value,
                       BackwardFn backward) {
  bool needs = false;
  for (int id : inputs) needs = needs || requires_grad(id);
  if (!needs) backward = nullptr;
  nodes_.push_back(Node{kind, std::move(inputs), std::move(value), needs, std::move(backward)});
  grads_.emplace_back();
  return Var<T>(this, static_cast<int>(nodes_.size() - 1));
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(int id) {
  auto& g = grads_[static_cast<std::size_t>(id)];
  const auto& v = nodes_[static_cast<std::size_t>(id)].value;
  if (g.shape() != v.shape() || g.numel() != v.numel()) g = Tensor<T>::zeros(v.shape());
  return g;
}

template <typename T>
bool Tape<T>::has_grad(int id) const {
  const auto& g = grads_[static_cast<std::size_t>(id)];
  return g.shape() == value(id).shape() && g.numel() == value(id).numel();
}

template <typename T>
Tensor<T> Tape<T>::grad(int id) const {
  if (has_grad(id)) return grads_[static_cast<std::size_t>(id)];
  return Tensor<T>::zeros(value(id).shape());
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.valid() && &loss.tape() != this) throw runtime_error("backward: loss is not on this tape");
  const int root = loss.id();
  if (root < 0 || static_cast<std::size_t>(root) >= nodes_.size())
    throw runtime_error("backward: loss is not on this tape");
  if (value(root).numel() != 1)
    throw ShapeError("backward", "numel", 1, static_cast<long long>(value(root).numel()));

  for (auto& g : grads_) g = Tensor<T>();
  if (requires_grad(root)) {
    grad_buffer(root)[0] = T(1);
    for (int id = root; id >= 0; --id) {
      auto& node = nodes_[static_cast<std::size_t>(id)];
      if (!node.backward || !has_grad(id)) continue;
      const Tensor<T> upstream = std::move(grads_[static_cast<std::size_t>(id)]);
      grads_[static_cast<std::size_t>(id)] = Tensor<T>();
      node.backward(*this, upstream);
    }
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id)
    if (nodes_[id].kind == OpKind::leaf && nodes_[id].requires_grad)
      grad_buffer(static_cast<int>(id));
}

template class Var<float>;
template class Var<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace segforge::ad
