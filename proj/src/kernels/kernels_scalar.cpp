#include <algorithm>
#include <cmath>
#include <numbers>

#include "kernels_internal.hpp"

namespace ocmae::kernels::scalar {

template <class T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
          bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T(0));
  for (std::int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* brow = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <class T>
void transpose(std::int64_t rows, std::int64_t cols, const T* src, T* dst) {
  constexpr std::int64_t kTile = 16;
  for (std::int64_t r0 = 0; r0 < rows; r0 += kTile) {
    for (std::int64_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::int64_t r1 = std::min(rows, r0 + kTile);
      const std::int64_t c1 = std::min(cols, c0 + kTile);
      for (std::int64_t r = r0; r < r1; ++r)
        for (std::int64_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

template <class T>
void softmax_rows(std::int64_t rows, std::int64_t n, const T* x, T* y) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x + r * n;
    T* yr = y + r * n;
    T mx = xr[0];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    T sum = 0;
    for (std::int64_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const T inv = T(1) / sum;
    for (std::int64_t j = 0; j < n; ++j) yr[j] *= inv;
  }
}

template <class T>
void softmax_backward_rows(std::int64_t rows, std::int64_t n, const T* y, const T* dy, T* dx) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* yr = y + r * n;
    const T* gr = dy + r * n;
    T* dr = dx + r * n;
    T dot = 0;
    for (std::int64_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
    for (std::int64_t j = 0; j < n; ++j) dr[j] += yr[j] * (gr[j] - dot);
  }
}

template <class T>
void gelu(std::int64_t n, const T* x, T* y) {
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::int64_t i = 0; i < n; ++i) y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
}

template <class T>
void gelu_backward(std::int64_t n, const T* x, const T* dy, T* dx) {
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  const T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  for (std::int64_t i = 0; i < n; ++i) {
    const T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
    const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x[i] * x[i]);
    dx[i] += dy[i] * (cdf + x[i] * pdf);
  }
}

template <class T>
void axpy(std::int64_t n, T alpha, const T* x, T* y) {
  for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

#define OCMAE_INSTANTIATE(T)                                                                 \
  template void gemm<T>(std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T*, bool); \
  template void transpose<T>(std::int64_t, std::int64_t, const T*, T*);                      \
  template void softmax_rows<T>(std::int64_t, std::int64_t, const T*, T*);                   \
  template void softmax_backward_rows<T>(std::int64_t, std::int64_t, const T*, const T*, T*); \
  template void gelu<T>(std::int64_t, const T*, T*);                                         \
  template void gelu_backward<T>(std::int64_t, const T*, const T*, T*);                      \
  template void axpy<T>(std::int64_t, T, const T*, T*);

OCMAE_INSTANTIATE(float)
OCMAE_INSTANTIATE(double)
#undef OCMAE_INSTANTIATE

}  // namespace ocmae::kernels::scalar
