#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocmae/rng.hpp"
#include "ocmae/tensor.hpp"

namespace ocmae::nn {

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  bool weight_decay = true;
};

// Ordered, named collection of trainable leaves. Order defines the
// checkpoint layout and the optimizer state layout.
template <class T>
class ParameterList {
 public:
  Tensor<T> add(std::string name, Tensor<T> tensor, bool weight_decay);
  const std::vector<Parameter<T>>& items() const { return items_; }
  std::vector<Tensor<T>> tensors() const;
  const Parameter<T>* find(const std::string& name) const;
  void zero_grad();
  std::int64_t total_elements() const;

 private:
  std::vector<Parameter<T>> items_;
};

template <class T>
Tensor<T> xavier_uniform(std::int64_t fan_in, std::int64_t fan_out, Rng& rng);
template <class T>
Tensor<T> normal_tensor(Shape shape, double stddev, Rng& rng);

template <class T>
struct Linear {
  Linear() = default;
  Linear(ParameterList<T>& params, const std::string& name, std::int64_t in, std::int64_t out, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;

  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]
};

template <class T>
struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(ParameterList<T>& params, const std::string& name, std::int64_t dim);
  Tensor<T> operator()(const Tensor<T>& x) const;

  Tensor<T> gamma;
  Tensor<T> beta;
};

// Multi-head scaled dot-product self-attention over axis 1 of [B, N, D].
template <class T>
struct MultiHeadAttention {
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterList<T>& params, const std::string& name, std::int64_t dim, std::int64_t heads,
                     Rng& rng);
  // `probs`, when given, receives the attention weights [B, heads, N, N].
  Tensor<T> operator()(const Tensor<T>& x, Tensor<T>* probs = nullptr) const;

  std::int64_t dim = 0;
  std::int64_t heads = 1;
  Linear<T> qkv;   // [D, 3D], output laid out as (q | k | v) x heads x head_dim
  Linear<T> proj;  // [D, D]
};

template <class T>
struct Mlp {
  Mlp() = default;
  Mlp(ParameterList<T>& params, const std::string& name, std::int64_t dim, std::int64_t hidden, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;

  Linear<T> fc1;
  Linear<T> fc2;
};

struct BlockConfig {
  std::int64_t dim = 0;
  std::int64_t heads = 1;
  std::int64_t mlp_ratio = 4;
};

// Pre-norm block: x + attn(ln(x)), then x + mlp(ln(x)).
template <class T>
struct TransformerBlock {
  TransformerBlock() = default;
  TransformerBlock(ParameterList<T>& params, const std::string& name, const BlockConfig& config, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;

  LayerNorm<T> norm1;
  MultiHeadAttention<T> attn;
  LayerNorm<T> norm2;
  Mlp<T> mlp;
};

}  // namespace ocmae::nn
