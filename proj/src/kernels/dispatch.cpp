#include "kernels_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace segforge::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& choose() {
  if (const char* env = std::getenv("SEGFORGE_ISA"); env && std::string_view(env) == "scalar")
    return scalar_table();
  if (const KernelTable* t = avx2_table()) return *t;
  return scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{&choose()};
  return current;
}

}  // namespace

const KernelTable* avx2_table() {
#ifdef SEGFORGE_HAVE_AVX2
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

void set_active(const KernelTable& table) { slot().store(&table, std::memory_order_relaxed); }

template <>
void gemm<float>(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
                 int ldc) {
  if (m <= 0 || n <= 0 || k <= 0) return;
  active().gemm_f32(m, n, k, a, lda, b, ldb, c, ldc);
}

template <>
void gemm<double>(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
                  double* c, int ldc) {
  if (m <= 0 || n <= 0 || k <= 0) return;
  active().gemm_f64(m, n, k, a, lda, b, ldb, c, ldc);
}

template <>
void adam_update<float>(float* p, const float* g, float* m, float* v, std::size_t n,
                        const AdamCoeffs<float>& c) {
  active().adam_f32(p, g, m, v, n, c);
}

template <>
void adam_update<double>(double* p, const double* g, double* m, double* v, std::size_t n,
                         const AdamCoeffs<double>& c) {
  active().adam_f64(p, g, m, v, n, c);
}

template <>
void relu<float>(const float* x, float* out, std::size_t n) {
  active().relu_f32(x, out, n);
}

template <>
void relu<double>(const double* x, double* out, std::size_t n) {
  active().relu_f64(x, out, n);
}

template <>
void relu_backward<float>(const float* y, const float* dy, float* dx, std::size_t n) {
  active().relu_back_f32(y, dy, dx, n);
}

template <>
void relu_backward<double>(const double* y, const double* dy, double* dx, std::size_t n) {
  active().relu_back_f64(y, dy, dx, n);
}

template <>
void axpy<float>(float a, const float* x, float* y, std::size_t n) {
  active().axpy_f32(a, x, y, n);
}

template <>
void axpy<double>(double a, const double* x, double* y, std::size_t n) {
  active().axpy_f64(a, x, y, n);
}

}  // namespace segforge::kernels
