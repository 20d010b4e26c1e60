#pragma once

#include <cstdint>
#include <string_view>

// Dense inner loops used by the tensor ops. Every kernel has a scalar
// reference implementation; float kernels additionally have an AVX2 variant
// that is selected at runtime when the CPU supports it. Double-precision
// calls always take the scalar path.
namespace ocmae::kernels {

enum class Backend { kScalar, kAvx2 };

bool backend_available(Backend backend);
Backend active_backend();
// Throws std::invalid_argument if the backend is not supported on this CPU.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

// Restores the previous backend on destruction.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend) : previous_(active_backend()) { set_backend(backend); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

// c[m,n] = a[m,k] * b[k,n], or c += a * b when accumulate is set. Row-major,
// contiguous operands.
template <class T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
          bool accumulate);

// c[m,n] (+)= a[m,k] * b[n,k]^T
template <class T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate);

// c[m,n] (+)= a[k,m]^T * b[k,n]
template <class T>
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate);

template <class T>
void transpose(std::int64_t rows, std::int64_t cols, const T* src, T* dst);

// Numerically stable softmax over each contiguous row of length n.
template <class T>
void softmax_rows(std::int64_t rows, std::int64_t n, const T* x, T* y);

// dx += y * (dy - <dy, y>) per row.
template <class T>
void softmax_backward_rows(std::int64_t rows, std::int64_t n, const T* y, const T* dy, T* dx);

// Exact (erf) GELU.
template <class T>
void gelu(std::int64_t n, const T* x, T* y);

// dx += dy * gelu'(x)
template <class T>
void gelu_backward(std::int64_t n, const T* x, const T* dy, T* dx);

// y += alpha * x
template <class T>
void axpy(std::int64_t n, T alpha, const T* x, T* y);

}  // namespace ocmae::kernels
