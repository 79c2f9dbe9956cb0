#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <memory>

#include "segforge/autodiff.hpp"
#include "segforge/kernels.hpp"

namespace segforge::ad {
namespace {

template <typename T>
void same_tape(Var<T> a, Var<T> b, const char* op) {
  if (&a.tape() != &b.tape()) throw runtime_error(std::string(op) + ": inputs live on different tapes");
}

template <typename T>
Tensor<T> scalar_tensor(T v) {
  return Tensor<T>(Shape::nchw(1, 1, 1, 1), v);
}

}  // namespace

template <typename T>
Var<T> conv_node(Var<T> x, Var<T> weight, Var<T> bias, Padding padding, bool fuse_relu) {
  const char* op = fuse_relu ? "conv2d_relu" : "conv2d";
  same_tape(x, weight, op);
  same_tape(x, bias, op);
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require_rank4(xs, std::string(op) + "(x)");
  require_rank4(ws, std::string(op) + "(weight)");
  if (ws[1] != xs.c()) throw ShapeError(op, "in_channels", ws[1], xs.c());
  if (bias.shape().rank() != 1 || bias.shape()[0] != ws[0])
    throw ShapeError(op, "bias", ws[0], bias.shape().rank() == 1 ? bias.shape()[0] : -1);
  int pad_h = 0, pad_w = 0;
  if (padding == Padding::same) {
    if (ws[2] % 2 == 0) throw ShapeError(op, "kernel_h", "must be odd for same padding");
    if (ws[3] % 2 == 0) throw ShapeError(op, "kernel_w", "must be odd for same padding");
    pad_h = static_cast<int>(ws[2] / 2);
    pad_w = static_cast<int>(ws[3] / 2);
  } else {
    if (ws[2] > xs.h()) throw ShapeError(op, "height", "smaller than kernel for valid padding");
    if (ws[3] > xs.w()) throw ShapeError(op, "width", "smaller than kernel for valid padding");
  }
  Tensor<T> out;
  detail::conv_forward<T>(x.value(), weight.value(), bias.value().data(), pad_h, pad_w, out);
  const int xi = x.id(), wi = weight.id(), bi = bias.id();
  const int self = static_cast<int>(x.tape().size());
  auto conv_back = [xi, wi, bi, pad_h, pad_w](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T>* dw = t.requires_grad(wi) ? &t.grad_buffer(wi) : nullptr;
    Tensor<T>* db = t.requires_grad(bi) ? &t.grad_buffer(bi) : nullptr;
    if (dw || db) detail::conv_backward_params<T>(t.value(xi), g, pad_h, pad_w, dw, db);
    if (t.requires_grad(xi)) detail::conv_backward_input<T>(g, t.value(wi), pad_h, pad_w, t.grad_buffer(xi));
  };
  if (!fuse_relu) return x.tape().record(OpKind::conv2d, {xi, wi, bi}, std::move(out), conv_back);

  // Only the rectified output is kept; y > 0 exactly where the pre-activation was.
  if (x.tape().track_kinks()) {
    double m = std::numeric_limits<double>::infinity();
    for (auto v : out.span()) m = std::min(m, std::abs(static_cast<double>(v)));
    x.tape().note_kink(m);
  }
  kernels::relu<T>(out.data(), out.data(), static_cast<std::size_t>(out.numel()));
  return x.tape().record(OpKind::conv2d_relu, {xi, wi, bi}, std::move(out),
                         [self, conv_back](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> masked(g.shape(), T(0));
                           kernels::relu_backward<T>(t.value(self).data(), g.data(), masked.data(),
                                                     static_cast<std::size_t>(g.numel()));
                           conv_back(t, masked);
                         });
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, Padding padding) {
  return conv_node(x, weight, bias, padding, false);
}

template <typename T>
Var<T> conv2d_relu(Var<T> x, Var<T> weight, Var<T> bias, Padding padding) {
  return conv_node(x, weight, bias, padding, true);
}

template <typename T>
Var<T> relu(Var<T> x) {
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  kernels::relu<T>(xv.data(), out.data(), static_cast<std::size_t>(xv.numel()));
  if (x.tape().track_kinks()) {
    double m = std::numeric_limits<double>::infinity();
    for (auto v : xv.span()) m = std::min(m, std::abs(static_cast<double>(v)));
    x.tape().note_kink(m);
  }
  const int xi = x.id();
  const int self = static_cast<int>(x.tape().size());
  return x.tape().record(OpKind::relu, {xi}, std::move(out),
                         [xi, self](Tape<T>& t, const Tensor<T>& g) {
                           if (!t.requires_grad(xi)) return;
                           kernels::relu_backward<T>(t.value(self).data(), g.data(),
                                                     t.grad_buffer(xi).data(),
                                                     static_cast<std::size_t>(g.numel()));
                         });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::int64_t i = 0; i < xv.numel(); ++i) {
    const T v = xv[i];
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  const int xi = x.id();
  const int self = static_cast<int>(x.tape().size());
  return x.tape().record(OpKind::sigmoid, {xi}, std::move(out),
                         [xi, self](Tape<T>& t, const Tensor<T>& g) {
                           const auto& s = t.value(self);
                           auto& dx = t.grad_buffer(xi);
                           for (std::int64_t i = 0; i < g.numel(); ++i)
                             dx[i] += g[i] * s[i] * (T(1) - s[i]);
                         });
}

template <typename T>
Var<T> maxpool2x2(Var<T> x) {
  const Shape& xs = x.shape();
  require_rank4(xs, "maxpool2x2");
  if (xs.h() % 2) throw ShapeError("maxpool2x2", "height", "must be even, got " + std::to_string(xs.h()));
  if (xs.w() % 2) throw ShapeError("maxpool2x2", "width", "must be even, got " + std::to_string(xs.w()));
  const std::int64_t oh = xs.h() / 2, ow = xs.w() / 2;
  const std::int64_t planes = xs.n() * xs.c();
  Tensor<T> out(Shape::nchw(xs.n(), xs.c(), oh, ow));
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(static_cast<std::size_t>(out.numel()));
  const auto& xv = x.value();
  const bool track = x.tape().track_kinks();
  double margin = std::numeric_limits<double>::infinity();
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = xv.data() + p * xs.h() * xs.w();
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t xx = 0; xx < ow; ++xx) {
        const std::int64_t base = 2 * y * xs.w() + 2 * xx;
        const std::int64_t cand[4] = {base, base + 1, base + xs.w(), base + xs.w() + 1};
        std::int64_t best = cand[0];
        for (int k = 1; k < 4; ++k)
          if (src[cand[k]] > src[best]) best = cand[k];
        const std::int64_t o = (p * oh + y) * ow + xx;
        out[o] = src[best];
        (*argmax)[static_cast<std::size_t>(o)] = static_cast<std::uint32_t>(best);
        if (track) {
          for (int k = 0; k < 4; ++k)
            if (cand[k] != best)
              margin = std::min(margin, static_cast<double>(src[best] - src[cand[k]]));
        }
      }
  }
  if (track) x.tape().note_kink(margin);
  const int xi = x.id();
  const std::int64_t in_plane = xs.h() * xs.w(), out_plane = oh * ow;
  return x.tape().record(OpKind::maxpool2x2, {xi}, std::move(out),
                         [xi, argmax, planes, in_plane, out_plane](Tape<T>& t, const Tensor<T>& g) {
                           auto& dx = t.grad_buffer(xi);
                           for (std::int64_t p = 0; p < planes; ++p)
                             for (std::int64_t o = 0; o < out_plane; ++o) {
                               const auto idx = static_cast<std::size_t>(p * out_plane + o);
                               dx[p * in_plane + (*argmax)[idx]] += g[p * out_plane + o];
                             }
                         });
}

template <typename T>
Var<T> upsample_nearest2x(Var<T> x) {
  const Shape& xs = x.shape();
  require_rank4(xs, "upsample_nearest2x");
  const std::int64_t h = xs.h(), w = xs.w(), planes = xs.n() * xs.c();
  Tensor<T> out(Shape::nchw(xs.n(), xs.c(), 2 * h, 2 * w));
  const auto& xv = x.value();
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = xv.data() + p * h * w;
    T* dst = out.data() + p * 4 * h * w;
    for (std::int64_t y = 0; y < 2 * h; ++y)
      for (std::int64_t xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
  }
  const int xi = x.id();
  return x.tape().record(OpKind::upsample_nearest2x, {xi}, std::move(out),
                         [xi, h, w, planes](Tape<T>& t, const Tensor<T>& g) {
                           auto& dx = t.grad_buffer(xi);
                           for (std::int64_t p = 0; p < planes; ++p) {
                             const T* src = g.data() + p * 4 * h * w;
                             T* dst = dx.data() + p * h * w;
                             for (std::int64_t y = 0; y < 2 * h; ++y)
                               for (std::int64_t xx = 0; xx < 2 * w; ++xx)
                                 dst[(y / 2) * w + xx / 2] += src[y * 2 * w + xx];
                           }
                         });
}

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  same_tape(a, b, "concat_channels");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  require_rank4(as, "concat_channels(a)");
  require_rank4(bs, "concat_channels(b)");
  if (as.n() != bs.n()) throw ShapeError("concat_channels", "batch", as.n(), bs.n());
  if (as.h() != bs.h()) throw ShapeError("concat_channels", "height", as.h(), bs.h());
  if (as.w() != bs.w()) throw ShapeError("concat_channels", "width", as.w(), bs.w());
  const std::int64_t n = as.n(), ca = as.c(), cb = bs.c(), plane = as.h() * as.w();
  Tensor<T> out(Shape::nchw(n, ca + cb, as.h(), as.w()));
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::int64_t i = 0; i < n; ++i) {
    T* dst = out.data() + i * (ca + cb) * plane;
    std::copy_n(av.data() + i * ca * plane, ca * plane, dst);
    std::copy_n(bv.data() + i * cb * plane, cb * plane, dst + ca * plane);
  }
  const int ai = a.id(), bi = b.id();
  return a.tape().record(OpKind::concat_channels, {ai, bi}, std::move(out),
                         [ai, bi, n, ca, cb, plane](Tape<T>& t, const Tensor<T>& g) {
                           for (std::int64_t i = 0; i < n; ++i) {
                             const T* src = g.data() + i * (ca + cb) * plane;
                             if (t.requires_grad(ai) && ca > 0)
                               kernels::axpy<T>(T(1), src, t.grad_buffer(ai).data() + i * ca * plane,
                                                static_cast<std::size_t>(ca * plane));
                             if (t.requires_grad(bi) && cb > 0)
                               kernels::axpy<T>(T(1), src + ca * plane,
                                                t.grad_buffer(bi).data() + i * cb * plane,
                                                static_cast<std::size_t>(cb * plane));
                           }
                         });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T acc = T(0);
  for (auto v : x.value().span()) acc += v;
  const int xi = x.id();
  return x.tape().record(OpKind::sum, {xi}, scalar_tensor<T>(acc),
                         [xi](Tape<T>& t, const Tensor<T>& g) {
                           auto& dx = t.grad_buffer(xi);
                           for (auto& v : dx.span()) v += g[0];
                         });
}

template <typename T>
Var<T> mean(Var<T> x) {
  const auto n = static_cast<T>(x.value().numel());
  if (x.value().numel() == 0) throw ShapeError("mean", "numel", "must be positive");
  T acc = T(0);
  for (auto v : x.value().span()) acc += v;
  const int xi = x.id();
  return x.tape().record(OpKind::mean, {xi}, scalar_tensor<T>(acc / n),
                         [xi, n](Tape<T>& t, const Tensor<T>& g) {
                           auto& dx = t.grad_buffer(xi);
                           for (auto& v : dx.span()) v += g[0] / n;
                         });
}

template <typename T>
Var<T> weighted_sum(Var<T> x, const Tensor<T>& weights) {
  if (weights.shape() != x.shape())
    throw ShapeError("weighted_sum", "shape", "weights " + weights.shape().str() +
                                                  " vs input " + x.shape().str());
  T acc = T(0);
  const auto& xv = x.value();
  for (std::int64_t i = 0; i < xv.numel(); ++i) acc += xv[i] * weights[i];
  const int xi = x.id();
  auto w = std::make_shared<const Tensor<T>>(weights);
  return x.tape().record(OpKind::weighted_sum, {xi}, scalar_tensor<T>(acc),
                         [xi, w](Tape<T>& t, const Tensor<T>& g) {
                           kernels::axpy<T>(g[0], w->data(), t.grad_buffer(xi).data(),
                                            static_cast<std::size_t>(w->numel()));
                         });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  same_tape(a, b, "add");
  if (a.shape() != b.shape())
    throw ShapeError("add", "shape", "mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor<T> out = a.value();
  kernels::axpy<T>(T(1), b.value().data(), out.data(), static_cast<std::size_t>(out.numel()));
  const int ai = a.id(), bi = b.id();
  return a.tape().record(OpKind::add, {ai, bi}, std::move(out),
                         [ai, bi](Tape<T>& t, const Tensor<T>& g) {
                           const auto n = static_cast<std::size_t>(g.numel());
                           if (t.requires_grad(ai)) kernels::axpy<T>(T(1), g.data(), t.grad_buffer(ai).data(), n);
                           if (t.requires_grad(bi)) kernels::axpy<T>(T(1), g.data(), t.grad_buffer(bi).data(), n);
                         });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  Tensor<T> out(x.shape());
  kernels::axpy<T>(factor, x.value().data(), out.data(), static_cast<std::size_t>(out.numel()));
  const int xi = x.id();
  return x.tape().record(OpKind::scale, {xi}, std::move(out),
                         [xi, factor](Tape<T>& t, const Tensor<T>& g) {
                           kernels::axpy<T>(factor, g.data(), t.grad_buffer(xi).data(),
                                            static_cast<std::size_t>(g.numel()));
                         });
}

#define SEGFORGE_INSTANTIATE_OPS(T)                                      \
  template Var<T> conv2d<T>(Var<T>, Var<T>, Var<T>, Padding);            \
  template Var<T> conv2d_relu<T>(Var<T>, Var<T>, Var<T>, Padding);         \
  template Var<T> relu<T>(Var<T>);                                       \
  template Var<T> sigmoid<T>(Var<T>);                                    \
  template Var<T> maxpool2x2<T>(Var<T>);                                 \
  template Var<T> upsample_nearest2x<T>(Var<T>);                         \
  template Var<T> concat_channels<T>(Var<T>, Var<T>);                    \
  template Var<T> sum<T>(Var<T>);                                        \
  template Var<T> mean<T>(Var<T>);                                       \
  template Var<T> weighted_sum<T>(Var<T>, const Tensor<T>&);             \
  template Var<T> add<T>(Var<T>, Var<T>);                                \
  template Var<T> scale<T>(Var<T>, T);

SEGFORGE_INSTANTIATE_OPS(float)
SEGFORGE_INSTANTIATE_OPS(double)

#undef SEGFORGE_INSTANTIATE_OPS

}  // namespace segforge::ad
