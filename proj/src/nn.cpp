#include "ocmae/nn.hpp"

#include <cmath>

#include "ocmae/errors.hpp"
#include "ocmae/ops.hpp"

namespace ocmae::nn {

template <class T>
Tensor<T> ParameterList<T>::add(std::string name, Tensor<T> tensor, bool weight_decay) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name " + name);
  tensor.set_requires_grad(true);
  items_.push_back({std::move(name), tensor, weight_decay});
  return tensor;
}

template <class T>
std::vector<Tensor<T>> ParameterList<T>::tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.tensor);
  return out;
}

template <class T>
const Parameter<T>* ParameterList<T>::find(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return &p;
  return nullptr;
}

template <class T>
void ParameterList<T>::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

template <class T>
std::int64_t ParameterList<T>::total_elements() const {
  std::int64_t n = 0;
  for (const auto& p : items_) n += p.tensor.numel();
  return n;
}

template <class T>
Tensor<T> xavier_uniform(std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<T> v(static_cast<std::size_t>(fan_in * fan_out));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>({fan_in, fan_out}, std::move(v));
}

template <class T>
Tensor<T> normal_tensor(Shape shape, double stddev, Rng& rng) {
  std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<T>(rng.normal(0.0, stddev));
  return Tensor<T>(std::move(shape), std::move(v));
}

template <class T>
Linear<T>::Linear(ParameterList<T>& params, const std::string& name, std::int64_t in, std::int64_t out, Rng& rng) {
  weight = params.add(name + ".weight", xavier_uniform<T>(in, out, rng), true);
  bias = params.add(name + ".bias", Tensor<T>({out}), false);
}

template <class T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  return ops::linear(x, weight, bias);
}

template <class T>
LayerNorm<T>::LayerNorm(ParameterList<T>& params, const std::string& name, std::int64_t dim) {
  gamma = params.add(name + ".weight", Tensor<T>::full({dim}, T(1)), false);
  beta = params.add(name + ".bias", Tensor<T>({dim}), false);
}

template <class T>
Tensor<T> LayerNorm<T>::operator()(const Tensor<T>& x) const {
  return ops::layer_norm(x, gamma, beta);
}

template <class T>
MultiHeadAttention<T>::MultiHeadAttention(ParameterList<T>& params, const std::string& name, std::int64_t dim_,
                                          std::int64_t heads_, Rng& rng)
    : dim(dim_), heads(heads_) {
  if (heads <= 0 || dim % heads != 0)
    throw ConfigError("attention: embed dim " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  qkv = Linear<T>(params, name + ".qkv", dim, 3 * dim, rng);
  proj = Linear<T>(params, name + ".proj", dim, dim, rng);
}

template <class T>
Tensor<T> MultiHeadAttention<T>::operator()(const Tensor<T>& x, Tensor<T>* probs) const {
  if (x.rank() != 3 || x.size(2) != dim)
    throw ConfigError("attention: expected [B, N, " + std::to_string(dim) + "], got " + shape_str(x.shape()));
  const std::int64_t b = x.size(0), n = x.size(1), hd = dim / heads;
  // [B, N, 3, H, hd] -> [3, B, H, N, hd]
  auto packed = ops::permute(ops::reshape(qkv(x), {b, n, 3, heads, hd}), {2, 0, 3, 1, 4});
  auto q = ops::reshape(ops::slice(packed, 0, 0, 1), {b * heads, n, hd});
  auto k = ops::reshape(ops::slice(packed, 0, 1, 2), {b * heads, n, hd});
  auto v = ops::reshape(ops::slice(packed, 0, 2, 3), {b * heads, n, hd});
  auto scores = ops::scale(ops::matmul(q, ops::transpose(k, 1, 2)), T(1) / std::sqrt(static_cast<T>(hd)));
  auto attn = ops::softmax(scores, -1);
  if (probs != nullptr) *probs = ops::reshape(attn, {b, heads, n, n});
  auto out = ops::matmul(attn, v);  // [B*H, N, hd]
  out = ops::reshape(ops::permute(ops::reshape(out, {b, heads, n, hd}), {0, 2, 1, 3}), {b, n, dim});
  return proj(out);
}

template <class T>
Mlp<T>::Mlp(ParameterList<T>& params, const std::string& name, std::int64_t dim, std::int64_t hidden, Rng& rng) {
  fc1 = Linear<T>(params, name + ".fc1", dim, hidden, rng);
  fc2 = Linear<T>(params, name + ".fc2", hidden, dim, rng);
}

template <class T>
Tensor<T> Mlp<T>::operator()(const Tensor<T>& x) const {
  return fc2(ops::gelu(fc1(x)));
}

template <class T>
TransformerBlock<T>::TransformerBlock(ParameterList<T>& params, const std::string& name, const BlockConfig& config,
                                      Rng& rng) {
  norm1 = LayerNorm<T>(params, name + ".norm1", config.dim);
  attn = MultiHeadAttention<T>(params, name + ".attn", config.dim, config.heads, rng);
  norm2 = LayerNorm<T>(params, name + ".norm2", config.dim);
  mlp = Mlp<T>(params, name + ".mlp", config.dim, config.dim * config.mlp_ratio, rng);
}

template <class T>
Tensor<T> TransformerBlock<T>::operator()(const Tensor<T>& x) const {
  auto h = ops::add(x, attn(norm1(x)));
  return ops::add(h, mlp(norm2(h)));
}

#define OCMAE_INSTANTIATE(T)                                          \
  template class ParameterList<T>;                                    \
  template Tensor<T> xavier_uniform<T>(std::int64_t, std::int64_t, Rng&); \
  template Tensor<T> normal_tensor<T>(Shape, double, Rng&);           \
  template struct Linear<T>;                                          \
  template struct LayerNorm<T>;                                       \
  template struct MultiHeadAttention<T>;                              \
  template struct Mlp<T>;                                             \
  template struct TransformerBlock<T>;

OCMAE_INSTANTIATE(float)
OCMAE_INSTANTIATE(double)
#undef OCMAE_INSTANTIATE

}  // namespace ocmae::nn
