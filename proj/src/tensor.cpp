#include "segforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace segforge {

Shape::Shape(std::initializer_list<std::int64_t> dims) {
  if (dims.size() > kMaxRank) throw Error(ErrorKind::runtime, "Shape: rank > 4");
  for (auto d : dims) {
    if (d < 0) throw ShapeError("Shape", "dim" + std::to_string(rank_), "is negative");
    dims_[static_cast<std::size_t>(rank_++)] = d;
  }
}

std::int64_t Shape::numel() const noexcept {
  std::int64_t n = 1;
  for (int i = 0; i < rank_; ++i) n *= dims_[static_cast<std::size_t>(i)];
  return n;
}

bool Shape::operator==(const Shape& o) const noexcept {
  if (rank_ != o.rank_) return false;
  for (int i = 0; i < rank_; ++i)
    if (dims_[static_cast<std::size_t>(i)] != o.dims_[static_cast<std::size_t>(i)]) return false;
  return true;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < rank_; ++i) os << (i ? "," : "") << dims_[static_cast<std::size_t>(i)];
  os << ')';
  return os.str();
}

void require_rank4(const Shape& s, const std::string& op) {
  if (s.rank() != 4) throw ShapeError(op, "rank", 4, s.rank());
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill)
    : shape_(shape), data_(static_cast<std::size_t>(shape.numel()), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (static_cast<std::int64_t>(data_.size()) != shape_.numel())
    throw ShapeError("Tensor", "numel", shape_.numel(), static_cast<long long>(data_.size()));
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace segforge
