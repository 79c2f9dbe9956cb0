#include "kernels_impl.hpp"

#include <algorithm>
#include <cmath>

namespace segforge::kernels::scalar {

template <typename T>
void gemm(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    const T* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void adam(T* param, const T* grad, T* m, T* v, std::size_t n, const AdamCoeffs<T>& c) {
  const T one_minus_b1 = T(1) - c.beta1;
  const T one_minus_b2 = T(1) - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const T m_hat = m[i] / c.bias_correction1;
    const T v_hat = v[i] / c.bias_correction2;
    param[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

template <typename T>
void relu(const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_back(const T* y, const T* dy, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (y[i] > T(0)) dx[i] += dy[i];
}

template <typename T>
void axpy(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace segforge::kernels::scalar

namespace segforge::kernels {

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",
      &scalar::gemm<float>,
      &scalar::gemm<double>,
      &scalar::adam<float>,
      &scalar::adam<double>,
      &scalar::relu<float>,
      &scalar::relu<double>,
      &scalar::relu_back<float>,
      &scalar::relu_back<double>,
      &scalar::axpy<float>,
      &scalar::axpy<double>,
  };
  return table;
}

}  // namespace segforge::kernels
