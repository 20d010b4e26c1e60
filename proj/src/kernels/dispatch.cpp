#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "kernels_internal.hpp"
#include "ocmae/kernels.hpp"

namespace ocmae::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return avx2::compiled() && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  const char* env = std::getenv("OCMAE_KERNELS");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Backend::kScalar;
  return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

bool use_avx2() { return backend_slot().load(std::memory_order_relaxed) == Backend::kAvx2; }

template <class T>
std::vector<T>& scratch(int which) {
  thread_local std::vector<T> buffers[2];
  return buffers[which];
}

// Rows are independent, so splitting them across threads leaves every output
// element's summation order unchanged.
template <class Fn>
void for_row_chunks(std::int64_t m, std::int64_t work, Fn&& fn) {
#ifdef _OPENMP
  constexpr std::int64_t kParallelWork = 1 << 20;
  if (work >= kParallelWork && m >= 16) {
    const std::int64_t chunks = (m + 15) / 16;
#pragma omp parallel for schedule(static)
    for (std::int64_t ch = 0; ch < chunks; ++ch) {
      const std::int64_t begin = ch * 16;
      fn(begin, std::min<std::int64_t>(16, m - begin));
    }
    return;
  }
#else
  (void)work;
#endif
  fn(0, m);
}

}  // namespace

bool backend_available(Backend backend) {
  return backend == Backend::kScalar || cpu_has_avx2();
}

Backend active_backend() { return backend_slot().load(); }

void set_backend(Backend backend) {
  if (!backend_available(backend))
    throw std::invalid_argument("kernel backend not available: " + std::string(backend_name(backend)));
  backend_slot().store(backend);
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
  }
  return "unknown";
}

template <class T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
          bool accumulate) {
  if (m == 0 || n == 0) return;
  for_row_chunks(m, m * n * k, [&](std::int64_t begin, std::int64_t rows) {
    if constexpr (std::is_same_v<T, float>) {
      if (use_avx2()) {
        avx2::gemm(rows, n, k, a + begin * k, b, c + begin * n, accumulate);
        return;
      }
    }
    scalar::gemm(rows, n, k, a + begin * k, b, c + begin * n, accumulate);
  });
}

template <class T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  auto& bt = scratch<T>(0);
  bt.resize(static_cast<std::size_t>(n * k));
  scalar::transpose(n, k, b, bt.data());
  gemm(m, n, k, a, bt.data(), c, accumulate);
}

template <class T>
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  auto& at = scratch<T>(1);
  at.resize(static_cast<std::size_t>(m * k));
  scalar::transpose(k, m, a, at.data());
  gemm(m, n, k, at.data(), b, c, accumulate);
}

template <class T>
void transpose(std::int64_t rows, std::int64_t cols, const T* src, T* dst) {
  scalar::transpose(rows, cols, src, dst);
}

template <class T>
void softmax_rows(std::int64_t rows, std::int64_t n, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>) {
    if (use_avx2()) return avx2::softmax_rows(rows, n, x, y);
  }
  scalar::softmax_rows(rows, n, x, y);
}

template <class T>
void softmax_backward_rows(std::int64_t rows, std::int64_t n, const T* y, const T* dy, T* dx) {
  if constexpr (std::is_same_v<T, float>) {
    if (use_avx2()) return avx2::softmax_backward_rows(rows, n, y, dy, dx);
  }
  scalar::softmax_backward_rows(rows, n, y, dy, dx);
}

template <class T>
void gelu(std::int64_t n, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>) {
    if (use_avx2()) return avx2::gelu(n, x, y);
  }
  scalar::gelu(n, x, y);
}

template <class T>
void gelu_backward(std::int64_t n, const T* x, const T* dy, T* dx) {
  if constexpr (std::is_same_v<T, float>) {
    if (use_avx2()) return avx2::gelu_backward(n, x, dy, dx);
  }
  scalar::gelu_backward(n, x, dy, dx);
}

template <class T>
void axpy(std::int64_t n, T alpha, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>) {
    if (use_avx2()) return avx2::axpy(n, alpha, x, y);
  }
  scalar::axpy(n, alpha, x, y);
}

#define OCMAE_INSTANTIATE(T)                                                                     \
  template void gemm<T>(std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T*, bool);    \
  template void gemm_nt<T>(std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T*, bool); \
  template void gemm_tn<T>(std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T*, bool); \
  template void transpose<T>(std::int64_t, std::int64_t, const T*, T*);                          \
  template void softmax_rows<T>(std::int64_t, std::int64_t, const T*, T*);                       \
  template void softmax_backward_rows<T>(std::int64_t, std::int64_t, const T*, const T*, T*);    \
  template void gelu<T>(std::int64_t, const T*, T*);                                             \
  template void gelu_backward<T>(std::int64_t, const T*, const T*, T*);                          \
  template void axpy<T>(std::int64_t, T, const T*, T*);

OCMAE_INSTANTIATE(float)
OCMAE_INSTANTIATE(double)
#undef OCMAE_INSTANTIATE

}  // namespace ocmae::kernels
