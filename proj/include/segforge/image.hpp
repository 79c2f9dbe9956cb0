#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segforge/error.hpp"

namespace segforge {

// Dense row-major 2-D grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int h, int w, T fill = T{}) : h_(h), w_(w), data_(checked_size(h, w), fill) {}
  Grid(int h, int w, std::vector<T> data) : h_(h), w_(w), data_(std::move(data)) {
    if (data_.size() != checked_size(h, w)) throw runtime_error("Grid: data size mismatch");
  }

  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Grid& o) const noexcept { return h_ == o.h_ && w_ == o.w_; }

  T& at(int y, int x) { return data_[static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(x)]; }
  const T& at(int y, int x) const { return data_[static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(x)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(w_); }
  const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(w_); }

  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  static std::size_t checked_size(int h, int w) {
    if (h < 0 || w < 0) throw runtime_error("Grid: negative dimension");
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }

  int h_ = 0;
  int w_ = 0;
  std::vector<T> data_;
};

// Grayscale intensities in [0, 1].
using Image = Grid<float>;

// Strictly two-valued grid: every cell is 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int h, int w, bool fill = false) : grid_(h, w, fill ? 1 : 0) {}

  // Any nonzero byte is foreground.
  static BinaryMask from_bytes(int h, int w, const std::vector<std::uint8_t>& bytes);

  int height() const noexcept { return grid_.height(); }
  int width() const noexcept { return grid_.width(); }
  std::size_t size() const noexcept { return grid_.size(); }
  bool same_shape(const BinaryMask& o) const noexcept { return grid_.same_shape(o.grid_); }

  bool get(int y, int x) const { return grid_.at(y, x) != 0; }
  void set(int y, int x, bool v) { grid_.at(y, x) = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return grid_[i] != 0; }

  std::int64_t count() const;

  const std::uint8_t* row(int y) const { return grid_.row(y); }
  std::uint8_t* row(int y) { return grid_.row(y); }
  const std::vector<std::uint8_t>& bits() const noexcept { return grid_.values(); }

  bool operator==(const BinaryMask&) const = default;

 private:
  Grid<std::uint8_t> grid_;
};

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const std::string& op);

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b);
BinaryMask complement(const BinaryMask& m);
bool is_subset(const BinaryMask& a, const BinaryMask& b);  // a ⊆ b

// ---- resizing ----------------------------------------------------------------

// Bilinear with half-pixel centers; edge samples clamp to the border.
Image resize_bilinear(const Image& img, int h, int w);

// Source index floor(dst * in / out); output stays binary.
BinaryMask resize_nearest(const BinaryMask& m, int h, int w);

}  // namespace segforge
