// Convolution via im2col + GEMM, processed in bands of output rows so the
// column buffer stays bounded for large inputs.

#include <algorithm>
#include <cstring>
#include <vector>

#include "segforge/autodiff.hpp"
#include "segforge/kernels.hpp"

namespace segforge::ad::detail {
namespace {

constexpr std::int64_t kMaxColumnElems = std::int64_t{1} << 20;

struct Geometry {
  int n, ci, h, w;
  int co, kh, kw;
  int pad_h, pad_w;
  int oh, ow;
};

template <typename T>
Geometry geometry(const Shape& xs, const Shape& ws, int pad_h, int pad_w) {
  Geometry g{};
  g.n = static_cast<int>(xs.n());
  g.ci = static_cast<int>(xs.c());
  g.h = static_cast<int>(xs.h());
  g.w = static_cast<int>(xs.w());
  g.co = static_cast<int>(ws[0]);
  g.kh = static_cast<int>(ws[2]);
  g.kw = static_cast<int>(ws[3]);
  g.pad_h = pad_h;
  g.pad_w = pad_w;
  g.oh = g.h + 2 * pad_h - g.kh + 1;
  g.ow = g.w + 2 * pad_w - g.kw + 1;
  return g;
}

int band_rows(const Geometry& g) {
  const std::int64_t k = std::int64_t{g.ci} * g.kh * g.kw;
  const std::int64_t per_row = k * g.ow;
  return static_cast<int>(std::clamp<std::int64_t>(kMaxColumnElems / std::max<std::int64_t>(per_row, 1), 1, g.oh));
}

// col[(c*kh + ky)*kw + kx][(y - y0)*ow + x] = img[c][y + ky - pad_h][x + kx - pad_w]
template <typename T>
void im2col(const T* img, const Geometry& g, int y0, int y1, T* col) {
  const int rows = y1 - y0;
  const std::int64_t p = std::int64_t{rows} * g.ow;
  T* dst = col;
  for (int c = 0; c < g.ci; ++c) {
    const T* plane = img + std::int64_t{c} * g.h * g.w;
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx, dst += p) {
        const int dx = kx - g.pad_w;
        const int x_lo = std::clamp(-dx, 0, g.ow);
        const int x_hi = std::clamp(g.w - dx, x_lo, g.ow);
        for (int y = y0; y < y1; ++y) {
          T* out = dst + std::int64_t{y - y0} * g.ow;
          const int sy = y + ky - g.pad_h;
          if (sy < 0 || sy >= g.h) {
            std::fill(out, out + g.ow, T(0));
            continue;
          }
          const T* src = plane + std::int64_t{sy} * g.w;
          std::fill(out, out + x_lo, T(0));
          std::copy(src + x_lo + dx, src + x_hi + dx, out + x_lo);
          std::fill(out + x_hi, out + g.ow, T(0));
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv_forward(const Tensor<T>& x, const Tensor<T>& weight, const T* bias, int pad_h,
                  int pad_w, Tensor<T>& out) {
  const Geometry g = geometry<T>(x.shape(), weight.shape(), pad_h, pad_w);
  const Shape os = Shape::nchw(g.n, g.co, g.oh, g.ow);
  if (out.shape() != os) out = Tensor<T>(os);
  const int k = g.ci * g.kh * g.kw;
  const std::int64_t plane = std::int64_t{g.oh} * g.ow;
  for (int b = 0; b < g.n; ++b) {
    T* ob = out.data() + std::int64_t{b} * g.co * plane;
    for (int o = 0; o < g.co; ++o)
      std::fill(ob + o * plane, ob + (o + 1) * plane, bias ? bias[o] : T(0));
  }
  if (k == 0 || plane == 0) return;

  const bool pointwise = g.kh == 1 && g.kw == 1 && g.pad_h == 0 && g.pad_w == 0;
  const int rows = band_rows(g);
  std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(std::int64_t{k} * rows * g.ow));
  for (int b = 0; b < g.n; ++b) {
    const T* xb = x.data() + std::int64_t{b} * g.ci * g.h * g.w;
    T* ob = out.data() + std::int64_t{b} * g.co * plane;
    if (pointwise) {
      kernels::gemm<T>(g.co, static_cast<int>(plane), k, weight.data(), k, xb,
                       static_cast<int>(plane), ob, static_cast<int>(plane));
      continue;
    }
    for (int y0 = 0; y0 < g.oh; y0 += rows) {
      const int y1 = std::min(g.oh, y0 + rows);
      const int p = (y1 - y0) * g.ow;
      im2col(xb, g, y0, y1, col.data());
      kernels::gemm<T>(g.co, p, k, weight.data(), k, col.data(), p, ob + std::int64_t{y0} * g.ow,
                       static_cast<int>(plane));
    }
  }
}

template <typename T>
void conv_backward_params(const Tensor<T>& x, const Tensor<T>& dout, int pad_h, int pad_w,
                          Tensor<T>* dweight, Tensor<T>* dbias) {
  const Shape ws = Shape::nchw(dout.shape().c(), x.shape().c(),
                               x.shape().h() + 2 * pad_h - dout.shape().h() + 1,
                               x.shape().w() + 2 * pad_w - dout.shape().w() + 1);
  const Geometry g = geometry<T>(x.shape(), ws, pad_h, pad_w);
  const std::int64_t plane = std::int64_t{g.oh} * g.ow;
  if (dbias) {
    for (int b = 0; b < g.n; ++b)
      for (int o = 0; o < g.co; ++o) {
        const T* d = dout.data() + (std::int64_t{b} * g.co + o) * plane;
        T acc = T(0);
        for (std::int64_t i = 0; i < plane; ++i) acc += d[i];
        (*dbias)[o] += acc;
      }
  }
  if (!dweight) return;
  const int k = g.ci * g.kh * g.kw;
  if (k == 0 || plane == 0) return;

  // dW^T[k, co] += col[k, p] * dout^T[p, co]
  const int rows = band_rows(g);
  std::vector<T> col(static_cast<std::size_t>(std::int64_t{k} * rows * g.ow));
  std::vector<T> dout_t(static_cast<std::size_t>(std::int64_t{rows} * g.ow * g.co));
  std::vector<T> dwt(static_cast<std::size_t>(std::int64_t{k} * g.co), T(0));
  for (int b = 0; b < g.n; ++b) {
    const T* xb = x.data() + std::int64_t{b} * g.ci * g.h * g.w;
    const T* db = dout.data() + std::int64_t{b} * g.co * plane;
    for (int y0 = 0; y0 < g.oh; y0 += rows) {
      const int y1 = std::min(g.oh, y0 + rows);
      const int p = (y1 - y0) * g.ow;
      im2col(xb, g, y0, y1, col.data());
      const std::int64_t off = std::int64_t{y0} * g.ow;
      for (int o = 0; o < g.co; ++o) {
        const T* src = db + o * plane + off;
        for (int i = 0; i < p; ++i) dout_t[static_cast<std::size_t>(std::int64_t{i} * g.co + o)] = src[i];
      }
      kernels::gemm<T>(k, g.co, p, col.data(), p, dout_t.data(), g.co, dwt.data(), g.co);
    }
  }
  T* dw = dweight->data();
  for (int o = 0; o < g.co; ++o)
    for (int i = 0; i < k; ++i) dw[std::int64_t{o} * k + i] += dwt[static_cast<std::size_t>(std::int64_t{i} * g.co + o)];
}

template <typename T>
void conv_backward_input(const Tensor<T>& dout, const Tensor<T>& weight, int pad_h, int pad_w,
                         Tensor<T>& dx) {
  // dx = conv(dout, flip(W)^T) with complementary padding.
  const auto& ws = weight.shape();
  const int co = static_cast<int>(ws[0]), ci = static_cast<int>(ws[1]);
  const int kh = static_cast<int>(ws[2]), kw = static_cast<int>(ws[3]);
  Tensor<T> flipped(Shape::nchw(ci, co, kh, kw));
  for (int o = 0; o < co; ++o)
    for (int i = 0; i < ci; ++i)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx)
          flipped.at(i, o, ky, kx) = weight.at(o, i, kh - 1 - ky, kw - 1 - kx);
  Tensor<T> tmp;
  conv_forward<T>(dout, flipped, nullptr, kh - 1 - pad_h, kw - 1 - pad_w, tmp);
  kernels::axpy<T>(T(1), tmp.data(), dx.data(), static_cast<std::size_t>(dx.numel()));
}

template void conv_forward<float>(const Tensor<float>&, const Tensor<float>&, const float*, int,
                                  int, Tensor<float>&);
template void conv_forward<double>(const Tensor<double>&, const Tensor<double>&, const double*,
                                   int, int, Tensor<double>&);
template void conv_backward_params<float>(const Tensor<float>&, const Tensor<float>&, int, int,
                                          Tensor<float>*, Tensor<float>*);
template void conv_backward_params<double>(const Tensor<double>&, const Tensor<double>&, int, int,
                                           Tensor<double>*, Tensor<double>*);
template void conv_backward_input<float>(const Tensor<float>&, const Tensor<float>&, int, int,
                                         Tensor<float>&);
template void conv_backward_input<double>(const Tensor<double>&, const Tensor<double>&, int, int,
                                          Tensor<double>&);

}  // namespace segforge::ad::detail
