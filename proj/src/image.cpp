#include "segforge/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace segforge {

BinaryMask BinaryMask::from_bytes(int h, int w, const std::vector<std::uint8_t>& bytes) {
  BinaryMask m(h, w);
  if (bytes.size() != m.size()) throw runtime_error("BinaryMask::from_bytes: size mismatch");
  for (std::size_t i = 0; i < bytes.size(); ++i) m.grid_[i] = bytes[i] ? 1 : 0;
  return m;
}

std::int64_t BinaryMask::count() const {
  return std::accumulate(grid_.values().begin(), grid_.values().end(), std::int64_t{0});
}

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const std::string& op) {
  if (a.height() != b.height()) throw ShapeError(op, "height", a.height(), b.height());
  if (a.width() != b.width()) throw ShapeError(op, "width", a.width(), b.width());
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "mask_union");
  BinaryMask out = a;
  for (int y = 0; y < a.height(); ++y) {
    std::uint8_t* o = out.row(y);
    const std::uint8_t* s = b.row(y);
    for (int x = 0; x < a.width(); ++x) o[x] |= s[x];
  }
  return out;
}

BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "mask_intersection");
  BinaryMask out = a;
  for (int y = 0; y < a.height(); ++y) {
    std::uint8_t* o = out.row(y);
    const std::uint8_t* s = b.row(y);
    for (int x = 0; x < a.width(); ++x) o[x] &= s[x];
  }
  return out;
}

BinaryMask complement(const BinaryMask& m) {
  BinaryMask out(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y) {
    std::uint8_t* o = out.row(y);
    const std::uint8_t* s = m.row(y);
    for (int x = 0; x < m.width(); ++x) o[x] = s[x] ^ 1;
  }
  return out;
}

bool is_subset(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "is_subset");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

Image resize_bilinear(const Image& img, int h, int w) {
  if (h <= 0 || w <= 0) throw usage_error("resize: target size must be positive");
  if (img.empty()) throw data_error("resize: empty source image");
  if (img.height() == h && img.width() == w) return img;
  const double sy = static_cast<double>(img.height()) / h;
  const double sx = static_cast<double>(img.width()) / w;
  std::vector<int> x0(static_cast<std::size_t>(w)), x1(static_cast<std::size_t>(w));
  std::vector<float> fx(static_cast<std::size_t>(w));
  for (int x = 0; x < w; ++x) {
    const double src = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
    const int i0 = static_cast<int>(std::floor(src));
    x0[static_cast<std::size_t>(x)] = i0;
    x1[static_cast<std::size_t>(x)] = std::min(i0 + 1, img.width() - 1);
    fx[static_cast<std::size_t>(x)] = static_cast<float>(src - i0);
  }
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    const double src = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(std::floor(src));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const float fy = static_cast<float>(src - y0);
    const float* r0 = img.row(y0);
    const float* r1 = img.row(y1);
    float* o = out.row(y);
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(x);
      const float top = r0[x0[i]] + fx[i] * (r0[x1[i]] - r0[x0[i]]);
      const float bot = r1[x0[i]] + fx[i] * (r1[x1[i]] - r1[x0[i]]);
      o[x] = top + fy * (bot - top);
    }
  }
  return out;
}

BinaryMask resize_nearest(const BinaryMask& m, int h, int w) {
  if (h <= 0 || w <= 0) throw usage_error("resize: target size must be positive");
  if (m.height() == 0 || m.width() == 0) throw data_error("resize: empty source mask");
  BinaryMask out(h, w);
  std::vector<int> xs(static_cast<std::size_t>(w));
  for (int x = 0; x < w; ++x)
    xs[static_cast<std::size_t>(x)] =
        static_cast<int>(static_cast<std::int64_t>(x) * m.width() / w);
  for (int y = 0; y < h; ++y) {
    const int sy = static_cast<int>(static_cast<std::int64_t>(y) * m.height() / h);
    const std::uint8_t* src = m.row(sy);
    std::uint8_t* dst = out.row(y);
    for (int x = 0; x < w; ++x) dst[x] = src[xs[static_cast<std::size_t>(x)]];
  }
  return out;
}

}  // namespace segforge
