#pragma once

#include <cstdint>

namespace ocmae::kernels {

namespace scalar {
template <class T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
          bool accumulate);
template <class T>
void transpose(std::int64_t rows, std::int64_t cols, const T* src, T* dst);
template <class T>
void softmax_rows(std::int64_t rows, std::int64_t n, const T* x, T* y);
template <class T>
void softmax_backward_rows(std::int64_t rows, std::int64_t n, const T* y, const T* dy, T* dx);
template <class T>
void gelu(std::int64_t n, const T* x, T* y);
template <class T>
void gelu_backward(std::int64_t n, const T* x, const T* dy, T* dx);
template <class T>
void axpy(std::int64_t n, T alpha, const T* x, T* y);
}  // namespace scalar

namespace avx2 {
bool compiled();
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const float* a, const float* b,
          float* c, bool accumulate);
void softmax_rows(std::int64_t rows, std::int64_t n, const float* x, float* y);
void softmax_backward_rows(std::int64_t rows, std::int64_t n, const float* y, const float* dy,
                           float* dx);
void gelu(std::int64_t n, const float* x, float* y);
void gelu_backward(std::int64_t n, const float* x, const float* dy, float* dx);
void axpy(std::int64_t n, float alpha, const float* x, float* y);
}  // namespace avx2

}  // namespace ocmae::kernels
