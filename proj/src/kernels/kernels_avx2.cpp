// AVX2 + FMA variants. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here may be called unless dispatch saw CPU support.

#include "kernels_impl.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace segforge::kernels::avx2 {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr int width = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg broadcast(float x) { return _mm256_set1_ps(x); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_ps(a); }
  static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
  static reg gt_zero_mask(reg a) { return _mm256_cmp_ps(a, zero(), _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_ps(a, b); }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr int width = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg broadcast(double x) { return _mm256_set1_pd(x); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_pd(a); }
  static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
  static reg gt_zero_mask(reg a) { return _mm256_cmp_pd(a, zero(), _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_pd(a, b); }
};

constexpr int kMr = 4;     // rows of C per micro-tile
constexpr int kKc = 256;   // depth block; keeps a B panel resident in L1

// 4 x (2*W) micro-tile over a depth block.
template <typename T>
inline void micro_4x2w(int kc, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
  using V = Vec<T>;
  constexpr int W = V::width;
  T* c0 = c;
  T* c1 = c + ldc;
  T* c2 = c + 2 * static_cast<std::ptrdiff_t>(ldc);
  T* c3 = c + 3 * static_cast<std::ptrdiff_t>(ldc);
  auto r00 = V::load(c0), r01 = V::load(c0 + W);
  auto r10 = V::load(c1), r11 = V::load(c1 + W);
  auto r20 = V::load(c2), r21 = V::load(c2 + W);
  auto r30 = V::load(c3), r31 = V::load(c3 + W);
  const T* a0 = a;
  const T* a1 = a + lda;
  const T* a2 = a + 2 * static_cast<std::ptrdiff_t>(lda);
  const T* a3 = a + 3 * static_cast<std::ptrdiff_t>(lda);
  for (int p = 0; p < kc; ++p) {
    const T* bp = b + static_cast<std::ptrdiff_t>(p) * ldb;
    const auto b0 = V::load(bp);
    const auto b1 = V::load(bp + W);
    auto av = V::broadcast(a0[p]);
    r00 = V::fmadd(av, b0, r00);
    r01 = V::fmadd(av, b1, r01);
    av = V::broadcast(a1[p]);
    r10 = V::fmadd(av, b0, r10);
    r11 = V::fmadd(av, b1, r11);
    av = V::broadcast(a2[p]);
    r20 = V::fmadd(av, b0, r20);
    r21 = V::fmadd(av, b1, r21);
    av = V::broadcast(a3[p]);
    r30 = V::fmadd(av, b0, r30);
    r31 = V::fmadd(av, b1, r31);
  }
  V::store(c0, r00), V::store(c0 + W, r01);
  V::store(c1, r10), V::store(c1 + W, r11);
  V::store(c2, r20), V::store(c2 + W, r21);
  V::store(c3, r30), V::store(c3 + W, r31);
}

// 1 x W strip.
template <typename T>
inline void micro_1xw(int kc, const T* a, const T* b, int ldb, T* c) {
  using V = Vec<T>;
  auto r = V::load(c);
  for (int p = 0; p < kc; ++p)
    r = V::fmadd(V::broadcast(a[p]), V::load(b + static_cast<std::ptrdiff_t>(p) * ldb), r);
  V::store(c, r);
}

template <typename T>
void gemm(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
  constexpr int W = Vec<T>::width;
  constexpr int Nr = 2 * W;
  const int n_wide = n - n % Nr;
  const int n_vec = n - n % W;
  const int m_main = m - m % kMr;

  for (int k0 = 0; k0 < k; k0 += kKc) {
    const int kc = std::min(kKc, k - k0);
    const T* ak = a + k0;
    const T* bk = b + static_cast<std::ptrdiff_t>(k0) * ldb;

    for (int j = 0; j < n_wide; j += Nr) {
      for (int i = 0; i < m_main; i += kMr)
        micro_4x2w<T>(kc, ak + static_cast<std::ptrdiff_t>(i) * lda, lda, bk + j, ldb,
                      c + static_cast<std::ptrdiff_t>(i) * ldc + j, ldc);
      for (int i = m_main; i < m; ++i) {
        micro_1xw<T>(kc, ak + static_cast<std::ptrdiff_t>(i) * lda, bk + j, ldb,
                     c + static_cast<std::ptrdiff_t>(i) * ldc + j);
        micro_1xw<T>(kc, ak + static_cast<std::ptrdiff_t>(i) * lda, bk + j + W, ldb,
                     c + static_cast<std::ptrdiff_t>(i) * ldc + j + W);
      }
    }
    for (int j = n_wide; j < n_vec; j += W)
      for (int i = 0; i < m; ++i)
        micro_1xw<T>(kc, ak + static_cast<std::ptrdiff_t>(i) * lda, bk + j, ldb,
                     c + static_cast<std::ptrdiff_t>(i) * ldc + j);
    if (n_vec < n) {
      for (int i = 0; i < m; ++i) {
        const T* arow = ak + static_cast<std::ptrdiff_t>(i) * lda;
        T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
        for (int p = 0; p < kc; ++p) {
          const T av = arow[p];
          const T* brow = bk + static_cast<std::ptrdiff_t>(p) * ldb;
          for (int j = n_vec; j < n; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

template <typename T>
void adam(T* param, const T* grad, T* m, T* v, std::size_t n, const AdamCoeffs<T>& c) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  const auto b1 = V::broadcast(c.beta1), b2 = V::broadcast(c.beta2);
  const auto omb1 = V::broadcast(T(1) - c.beta1), omb2 = V::broadcast(T(1) - c.beta2);
  const auto bc1 = V::broadcast(c.bias_correction1), bc2 = V::broadcast(c.bias_correction2);
  const auto eps = V::broadcast(c.eps), lr = V::broadcast(c.lr);
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    const auto g = V::load(grad + i);
    const auto mi = V::add(V::mul(b1, V::load(m + i)), V::mul(omb1, g));
    const auto vi = V::add(V::mul(b2, V::load(v + i)), V::mul(omb2, V::mul(g, g)));
    V::store(m + i, mi);
    V::store(v + i, vi);
    const auto m_hat = V::div(mi, bc1);
    const auto v_hat = V::div(vi, bc2);
    const auto step = V::div(V::mul(lr, m_hat), V::add(V::sqrt(v_hat), eps));
    V::store(param + i, V::sub(V::load(param + i), step));
  }
  const T one_minus_b1 = T(1) - c.beta1;
  const T one_minus_b2 = T(1) - c.beta2;
  for (; i < n; ++i) {
    const T g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    param[i] -= c.lr * (m[i] / c.bias_correction1) / (std::sqrt(v[i] / c.bias_correction2) + c.eps);
  }
}

template <typename T>
void relu(const T* x, T* out, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  std::size_t i = 0;
  for (; i + W <= n; i += W) V::store(out + i, V::max(V::load(x + i), V::zero()));
  for (; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_back(const T* y, const T* dy, T* dx, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    const auto mask = V::gt_zero_mask(V::load(y + i));
    V::store(dx + i, V::add(V::load(dx + i), V::and_(mask, V::load(dy + i))));
  }
  for (; i < n; ++i)
    if (y[i] > T(0)) dx[i] += dy[i];
}

template <typename T>
void axpy(T a, const T* x, T* y, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  const auto av = V::broadcast(a);
  std::size_t i = 0;
  for (; i + W <= n; i += W) V::store(y + i, V::fmadd(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

}  // namespace
}  // namespace segforge::kernels::avx2

namespace segforge::kernels {

const KernelTable& avx2_table_unchecked() {
  static const KernelTable table{
      "avx2",
      &avx2::gemm<float>,
      &avx2::gemm<double>,
      &avx2::adam<float>,
      &avx2::adam<double>,
      &avx2::relu<float>,
      &avx2::relu<double>,
      &avx2::relu_back<float>,
      &avx2::relu_back<double>,
      &avx2::axpy<float>,
      &avx2::axpy<double>,
  };
  return table;
}

}  // namespace segforge::kernels
