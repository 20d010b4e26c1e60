#pragma once

#include <cstdint>
#include <vector>

#include "ocmae/tensor.hpp"

// Differentiable tensor operations. Shape errors throw ConfigError with the
// offending shapes in the message.
namespace ocmae::ops {

// Elementwise with numpy-style broadcasting.
template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <class T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <class T> Tensor<T> add_scalar(const Tensor<T>& a, T offset);
template <class T> Tensor<T> square(const Tensor<T>& a);
template <class T> Tensor<T> log(const Tensor<T>& a);
template <class T> Tensor<T> exp(const Tensor<T>& a);
// x * log(x) with the 0 * log 0 = 0 convention.
template <class T> Tensor<T> xlogx(const Tensor<T>& a);
template <class T> Tensor<T> gelu(const Tensor<T>& a);

template <class T> Tensor<T> sum(const Tensor<T>& a);
template <class T> Tensor<T> mean(const Tensor<T>& a);
template <class T> Tensor<T> sum(const Tensor<T>& a, std::int64_t axis, bool keepdim = false);
template <class T> Tensor<T> mean(const Tensor<T>& a, std::int64_t axis, bool keepdim = false);

template <class T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <class T> Tensor<T> permute(const Tensor<T>& a, const std::vector<std::int64_t>& axes);
template <class T> Tensor<T> transpose(const Tensor<T>& a, std::int64_t axis0, std::int64_t axis1);
template <class T> Tensor<T> broadcast_to(const Tensor<T>& a, const Shape& shape);
template <class T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::int64_t axis);
// Elements [begin, end) along axis.
template <class T> Tensor<T> slice(const Tensor<T>& a, std::int64_t axis, std::int64_t begin, std::int64_t end);

// a: [B, N, ...]; out[b, j, ...] = a[b, index[b][j], ...]. Every index[b]
// must have the same length.
template <class T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<std::vector<std::int64_t>>& index);

// input [..., Din] x weight [Din, Dout] + bias [Dout]; bias may be undefined.
template <class T> Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

// a [..., M, K] x b [..., K, N] with equal batch extents, or b of rank 2
// shared across the batch.
template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <class T> Tensor<T> softmax(const Tensor<T>& a, std::int64_t axis);

// Normalizes over the last axis, then applies gamma/beta of extent [D].
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-6));

}  // namespace ocmae::ops
