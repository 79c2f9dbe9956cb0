#pragma once
// Data-parallel inner loops used by the tensor layer.
//
// Every kernel has a scalar reference implementation; an AVX2+FMA variant is
// compiled separately and selected at runtime when the CPU supports it.
// SEGFORGE_ISA=scalar in the environment forces the reference path.

#include <cstddef>
#include <string_view>

namespace segforge::kernels {

template <typename T>
struct AdamCoeffs {
  T beta1;
  T beta2;
  T eps;
  T lr;
  T bias_correction1;  // 1 - beta1^t
  T bias_correction2;  // 1 - beta2^t
};

// C[M,N] += A[M,K] * B[K,N]; all row-major with explicit leading dimensions.
template <typename T>
using GemmFn = void (*)(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c,
                        int ldc);

template <typename T>
using AdamFn = void (*)(T* param, const T* grad, T* m, T* v, std::size_t n,
                        const AdamCoeffs<T>& coeffs);

// out[i] = max(x[i], 0)
template <typename T>
using ReluFn = void (*)(const T* x, T* out, std::size_t n);

// dx[i] += (y[i] > 0) ? dy[i] : 0
template <typename T>
using ReluBackFn = void (*)(const T* y, const T* dy, T* dx, std::size_t n);

// y[i] += a * x[i]
template <typename T>
using AxpyFn = void (*)(T a, const T* x, T* y, std::size_t n);

struct KernelTable {
  std::string_view name;
  GemmFn<float> gemm_f32;
  GemmFn<double> gemm_f64;
  AdamFn<float> adam_f32;
  AdamFn<double> adam_f64;
  ReluFn<float> relu_f32;
  ReluFn<double> relu_f64;
  ReluBackFn<float> relu_back_f32;
  ReluBackFn<double> relu_back_f64;
  AxpyFn<float> axpy_f32;
  AxpyFn<double> axpy_f64;
};

const KernelTable& scalar_table();

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table();

// Table chosen at first use: AVX2 if available, unless SEGFORGE_ISA=scalar.
const KernelTable& active();

// Overrides the active table (tests use this to pin a path). Not thread-safe
// with concurrent kernel calls.
void set_active(const KernelTable& table);

template <typename T>
void gemm(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc);

template <typename T>
void adam_update(T* param, const T* grad, T* m, T* v, std::size_t n, const AdamCoeffs<T>& coeffs);

template <typename T>
void relu(const T* x, T* out, std::size_t n);

template <typename T>
void relu_backward(const T* y, const T* dy, T* dx, std::size_t n);

template <typename T>
void axpy(T a, const T* x, T* y, std::size_t n);

}  // namespace segforge::kernels
