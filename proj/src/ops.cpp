#include "ocmae/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ocmae/errors.hpp"
#include "ocmae/kernels.hpp"

namespace ocmae::ops {
namespace {

template <class T>
using NodeT = detail::Node<T>;

template <class T>
using Backward = std::function<void(NodeT<T>&)>;

template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::initializer_list<const Tensor<T>*> inputs,
                      Backward<T> backward) {
  auto node = std::make_shared<NodeT<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs_grad = false;
  if (grad_enabled())
    for (const Tensor<T>* in : inputs)
      if (in->defined() && in->requires_grad()) needs_grad = true;
  if (needs_grad) {
    node->requires_grad = true;
    for (const Tensor<T>* in : inputs)
      node->inputs.push_back(in->defined() ? in->node() : std::make_shared<NodeT<T>>());
    node->backward = std::move(backward);
  }
  return Tensor<T>::from_node(std::move(node));
}

template <class T>
Tensor<T> make_result_n(Shape shape, std::vector<T> value, const std::vector<Tensor<T>>& inputs,
                        Backward<T> backward) {
  auto node = std::make_shared<NodeT<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs_grad = false;
  if (grad_enabled())
    for (const auto& in : inputs)
      if (in.requires_grad()) needs_grad = true;
  if (needs_grad) {
    node->requires_grad = true;
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Tensor<T>::from_node(std::move(node));
}

std::int64_t normalize_axis(std::int64_t axis, std::int64_t rank, const Shape& shape) {
  const std::int64_t a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank)
    throw ConfigError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape));
  return a;
}

std::vector<std::int64_t> contiguous_strides(const Shape& shape) {
  std::vector<std::int64_t> strides(shape.size(), 1);
  for (std::int64_t i = static_cast<std::int64_t>(shape.size()) - 2; i >= 0; --i)
    strides[static_cast<std::size_t>(i)] = strides[static_cast<std::size_t>(i + 1)] * shape[static_cast<std::size_t>(i + 1)];
  return strides;
}

// Calls fn(out_index, offset_a, offset_b) for every element of `out`, where
// the offsets advance by the given per-axis strides.
template <class Fn>
void strided_loop2(const Shape& out, const std::vector<std::int64_t>& sa, const std::vector<std::int64_t>& sb,
                   Fn&& fn) {
  const std::size_t rank = out.size();
  const std::int64_t total = shape_numel(out);
  if (total == 0) return;
  if (rank == 0) {
    fn(0, 0, 0);
    return;
  }
  const std::int64_t inner = out[rank - 1];
  const std::int64_t ia = sa[rank - 1];
  const std::int64_t ib = sb[rank - 1];
  std::vector<std::int64_t> counter(rank, 0);
  std::int64_t off_a = 0, off_b = 0;
  for (std::int64_t base = 0; base < total; base += inner) {
    for (std::int64_t j = 0; j < inner; ++j) fn(base + j, off_a + j * ia, off_b + j * ib);
    for (std::int64_t d = static_cast<std::int64_t>(rank) - 2; d >= 0; --d) {
      const auto du = static_cast<std::size_t>(d);
      ++counter[du];
      off_a += sa[du];
      off_b += sb[du];
      if (counter[du] < out[du]) break;
      off_a -= sa[du] * out[du];
      off_b -= sb[du] * out[du];
      counter[du] = 0;
    }
  }
}

template <class Fn>
void strided_loop1(const Shape& out, const std::vector<std::int64_t>& sa, Fn&& fn) {
  strided_loop2(out, sa, sa, [&](std::int64_t o, std::int64_t a, std::int64_t) { fn(o, a); });
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::int64_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea != eb && ea != 1 && eb != 1)
      throw ConfigError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                        " are not broadcastable");
    out[i] = ea == 1 ? eb : ea;
  }
  return out;
}

// Strides of `in` aligned to `out`'s rank, zero along broadcast axes.
std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  const auto cs = contiguous_strides(in);
  std::vector<std::int64_t> s(out.size(), 0);
  const std::size_t lead = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) s[lead + i] = in[i] == 1 ? 0 : cs[i];
  return s;
}

enum class BinaryKind { kAdd, kSub, kMul, kDiv };

template <class T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind, const char* name) {
  const Shape out = broadcast_shape(a.shape(), b.shape(), name);
  const auto sa = broadcast_strides(a.shape(), out);
  const auto sb = broadcast_strides(b.shape(), out);
  std::vector<T> value(static_cast<std::size_t>(shape_numel(out)));
  const T* pa = a.data();
  const T* pb = b.data();
  const bool same = a.shape() == b.shape();
  auto apply = [kind](T x, T y) {
    switch (kind) {
      case BinaryKind::kAdd: return x + y;
      case BinaryKind::kSub: return x - y;
      case BinaryKind::kMul: return x * y;
      case BinaryKind::kDiv: return x / y;
    }
    return T(0);
  };
  if (same) {
    for (std::size_t i = 0; i < value.size(); ++i) value[i] = apply(pa[i], pb[i]);
  } else {
    strided_loop2(out, sa, sb, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
      value[static_cast<std::size_t>(o)] = apply(pa[ia], pb[ib]);
    });
  }
  return make_result<T>(out, std::move(value), {&a, &b}, [out, sa, sb, kind, same](NodeT<T>& self) {
    NodeT<T>& na = *self.inputs[0];
    NodeT<T>& nb = *self.inputs[1];
    const T* g = self.grad.data();
    const T* va = na.value.data();
    const T* vb = nb.value.data();
    T* ga = na.requires_grad ? na.grad.data() : nullptr;
    T* gb = nb.requires_grad ? nb.grad.data() : nullptr;
    auto step = [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
      const T go = g[o];
      switch (kind) {
        case BinaryKind::kAdd:
          if (ga) ga[ia] += go;
          if (gb) gb[ib] += go;
          break;
        case BinaryKind::kSub:
          if (ga) ga[ia] += go;
          if (gb) gb[ib] -= go;
          break;
        case BinaryKind::kMul:
          if (ga) ga[ia] += go * vb[ib];
          if (gb) gb[ib] += go * va[ia];
          break;
        case BinaryKind::kDiv:
          if (ga) ga[ia] += go / vb[ib];
          if (gb) gb[ib] -= go * va[ia] / (vb[ib] * vb[ib]);
          break;
      }
    };
    if (same) {
      const auto n = static_cast<std::int64_t>(self.grad.size());
      for (std::int64_t i = 0; i < n; ++i) step(i, i, i);
    } else {
      strided_loop2(out, sa, sb, step);
    }
  });
}

template <class T, class Fwd, class Deriv>
Tensor<T> unary(const Tensor<T>& a, Fwd fwd, Deriv deriv) {
  std::vector<T> value(a.values().begin(), a.values().end());
  for (auto& v : value) v = fwd(v);
  return make_result<T>(a.shape(), std::move(value), {&a}, [deriv](NodeT<T>& self) {
    NodeT<T>& in = *self.inputs[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
  });
}

struct AxisSplit {
  std::int64_t outer, n, inner;
};

AxisSplit split_at(const Shape& shape, std::int64_t axis) {
  AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
  for (std::int64_t i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::kAdd, "add");
}
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::kSub, "sub");
}
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::kMul, "mul");
}
template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::kDiv, "div");
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  return unary(a, [offset](T x) { return x + offset; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> square(const Tensor<T>& a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <class T>
Tensor<T> log(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <class T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> xlogx(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return x > T(0) ? x * std::log(x) : T(0); },
      [](T x, T) { return std::log(std::max(x, std::numeric_limits<T>::min())) + T(1); });
}

template <class T>
Tensor<T> gelu(const Tensor<T>& a) {
  std::vector<T> value(static_cast<std::size_t>(a.numel()));
  kernels::gelu<T>(a.numel(), a.data(), value.data());
  return make_result<T>(a.shape(), std::move(value), {&a}, [](NodeT<T>& self) {
    NodeT<T>& in = *self.inputs[0];
    kernels::gelu_backward<T>(static_cast<std::int64_t>(in.value.size()), in.value.data(), self.grad.data(),
                              in.grad.data());
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (T v : a.values()) total += v;
  return make_result<T>(Shape{}, {total}, {&a}, [](NodeT<T>& self) {
    NodeT<T>& in = *self.inputs[0];
    const T g = self.grad[0];
    for (auto& v : in.grad) v += g;
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw ConfigError("mean of empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <class T>
Tensor<T> sum(const Tensor<T>& a, std::int64_t axis, bool keepdim) {
  const std::int64_t ax = normalize_axis(axis, a.rank(), a.shape());
  const AxisSplit s = split_at(a.shape(), ax);
  Shape out_shape = a.shape();
  if (keepdim)
    out_shape[static_cast<std::size_t>(ax)] = 1;
  else
    out_shape.erase(out_shape.begin() + ax);
  std::vector<T> value(static_cast<std::size_t>(s.outer * s.inner), T(0));
  const T* p = a.data();
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t j = 0; j < s.n; ++j)
      for (std::int64_t i = 0; i < s.inner; ++i)
        value[static_cast<std::size_t>(o * s.inner + i)] += p[(o * s.n + j) * s.inner + i];
  return make_result<T>(std::move(out_shape), std::move(value), {&a}, [s](NodeT<T>& self) {
    NodeT<T>& in = *self.inputs[0];
    for (std::int64_t o = 0; o < s.outer; ++o)
      for (std::int64_t j = 0; j < s.n; ++j)
        for (std::int64_t i = 0; i < s.inner; ++i)
          in.grad[static_cast<std::size_t>((o * s.n + j) * s.inner + i)] +=
              self.grad[static_cast<std::size_t>(o * s.inner + i)];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& a, std::int64_t axis, bool keepdim) {
  const std::int64_t n = a.size(axis);
  if (n == 0) throw ConfigError("mean over empty axis of shape " + shape_str(a.shape()));
  return scale(sum(a, axis, keepdim), T(1) / static_cast<T>(n));
}

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw ConfigError("reshape: more than one inferred extent in " + shape_str(shape));
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0 && known > 0) shape[static_cast<std::size_t>(infer)] = a.numel() / known;
  if (shape_numel(shape) != a.numel())
    throw ConfigError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<T> value(a.values().begin(), a.values().end());
  return make_result<T>(std::move(shape), std::move(value), {&a}, [](NodeT<T>& self) {
    NodeT<T>& in = *self.inputs[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
}

template <class T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::int64_t>& axes) {
  const std::int64_t rank = a.rank();
  if (static_cast<std::int64_t>(axes.size()) != rank)
    throw ConfigError("permute: " + std::to_string(axes.size()) + " axes for shape " + shape_str(a.shape()));
  std::vector<bool> seen(static_cast<std::size_t>(rank), false);
  Shape out(static_cast<std::size_t>(rank));
  const auto in_strides = contiguous_strides(a.shape());
  std::vector<std::int64_t> strides(static_cast<std::size_t>(rank));
  for (std::int64_t i = 0; i < rank; ++i) {
    const std::int64_t ax = normalize_axis(axes[static_cast<std::size_t>(i)], rank, a.shape());
    if (seen[static_cast<std::size_t>(ax)]) throw ConfigError("permute: repeated axis");
    seen[static_cast<std::size_t>(ax)] = true;
    out[static_cast<std::size_t>(i)] = a.shape()[static_cast<std::size_t>(ax)];
    strides[static_cast<std::size_t>(i)] = in_strides[static_cast<std::size_t>(ax)];
  }
  std::vector<T> value(static_cast<std::size_t>(a.numel()));
  const T* p = a.data();
  strided_loop1(out, strides, [&](std::int64_t o, std::int64_t i) { value[static_cast<std::size_t>(o)] = p[i]; });
  return make_result<T>(out, std::move(value), {&a}, [out, strides](NodeT<T>& self) {
    NodeT<T>& in = *self.inputs[0];
    strided_loop1(out, strides, [&](std::int64_t o, std::int64_t i) {
      in.grad[static_cast<std::size_t>(i)] += self.grad[static_cast<std::size_t>(o)];
    });
  });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a, std::int64_t axis0, std::int64_t axis1) {
  std::vector<std::int64_t> axes(static_cast<std::size_t>(a.rank()));
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[static_cast<std::size_t>(normalize_axis(axis0, a.rank(), a.shape()))],
            axes[static_cast<std::size_t>(normalize_axis(axis1, a.rank(), a.shape()))]);
  return permute(a, axes);
}

template <class T>
Tensor<T> broadcast_to(const Tensor<T>& a, const Shape& shape) {
  if (broadcast_shape(a.shape(), shape, "broadcast_to") != shape)
    throw ConfigError("broadcast_to: cannot broadcast " + shape_str(a.shape()) + " to " + shape_str(shape));
  const auto strides = broadcast_strides(a.shape(), shape);
  std::vector<T> value(static_cast<std::size_t>(shape_numel(shape)));
  const T* p = a.data();
  strided_loop1(shape, strides, [&](std::int64_t o, std::int64_t i) { value[static_cast<std::size_t>(o)] = p[i]; });
  return make_result<T>(shape, std::move(value), {&a}, [shape, strides](NodeT<T>& self) {
    NodeT<T>& in = *self.inputs[0];
    strided_loop1(shape, strides, [&](std::int64_t o, std::int64_t i) {
      in.grad[static_cast<std::size_t>(i)] += self.grad[static_cast<std::size_t>(o)];
    });
  });
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::int64_t axis) {
  if (parts.empty()) throw ConfigError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  const std::int64_t ax = normalize_axis(axis, static_cast<std::int64_t>(first.size()), first);
  Shape out = first;
  out[static_cast<std::size_t>(ax)] = 0;
  std::vector<std::int64_t> extents;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != first.size())
      throw ConfigError("concat: rank mismatch " + shape_str(first) + " vs " + shape_str(s));
    for (std::size_t i = 0; i < s.size(); ++i)
      if (static_cast<std::int64_t>(i) != ax && s[i] != first[i])
        throw ConfigError("concat: shape mismatch " + shape_str(first) + " vs " + shape_str(s));
    extents.push_back(s[static_cast<std::size_t>(ax)]);
    out[static_cast<std::size_t>(ax)] += s[static_cast<std::size_t>(ax)];
  }
  const AxisSplit s = split_at(out, ax);
  std::vector<T> value(static_cast<std::size_t>(shape_numel(out)));
  std::int64_t offset = 0;
  for (std::size_t t = 0; t < parts.size(); ++t) {
    const std::int64_t block = extents[t] * s.inner;
    const T* src = parts[t].data();
    for (std::int64_t o = 0; o < s.outer; ++o)
      std::copy(src + o * block, src + (o + 1) * block, value.begin() + o * s.n * s.inner + offset);
    offset += block;
  }
  return make_result_n<T>(out, std::move(value), parts, [s, extents](NodeT<T>& self) {
    std::int64_t offset = 0;
    for (std::size_t t = 0; t < extents.size(); ++t) {
      NodeT<T>& in = *self.inputs[t];
      const std::int64_t block = extents[t] * s.inner;
      if (in.requires_grad) {
        for (std::int64_t o = 0; o < s.outer; ++o) {
          const T* g = self.grad.data() + o * s.n * s.inner + offset;
          T* dst = in.grad.data() + o * block;
          for (std::int64_t i = 0; i < block; ++i) dst[i] += g[i];
        }
      }
      offset += block;
    }
  });
}

template <class T>
Tensor<T> slice(const Tensor<T>& a, std::int64_t axis, std::int64_t begin, std::int64_t end) {
  const std::int64_t ax = normalize_axis(axis, a.rank(), a.shape());
  const AxisSplit s = split_at(a.shape(), ax);
  if (begin < 0 || end > s.n || begin > end)
    throw ConfigError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for axis " +
                      std::to_string(ax) + " of " + shape_str(a.shape()));
  Shape out = a.shape();
  out[static_cast<std::size_t>(ax)] = end - begin;
  const std::int64_t block = (end - begin) * s.inner;
  std::vector<T> value(static_cast<std::size_t>(s.outer * block));
  const T* p = a.data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    const T* src = p + (o * s.n + begin) * s.inner;
    std::copy(src, src + block, value.begin() + o * block);
  }
  return make_result<T>(std::move(out), std::move(value), {&a}, [s, begin, block](NodeT<T>& self) {
    NodeT<T>& in = *self.inputs[0];
    for (std::int64_t o = 0; o < s.outer; ++o) {
      T* dst = in.grad.data() + (o * s.n + begin) * s.inner;
      const T* g = self.grad.data() + o * block;
      for (std::int64_t i = 0; i < block; ++i) dst[i] += g[i];
    }
  });
}

template <class T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<std::vector<std::int64_t>>& index) {
  if (a.rank() < 2) throw ConfigError("gather_rows needs rank >= 2, got " + shape_str(a.shape()));
  const std::int64_t batch = a.size(0);
  const std::int64_t rows = a.size(1);
  if (static_cast<std::int64_t>(index.size()) != batch)
    throw ConfigError("gather_rows: " + std::to_string(index.size()) + " index lists for batch of " +
                      std::to_string(batch));
  const std::int64_t m = batch == 0 ? 0 : static_cast<std::int64_t>(index[0].size());
  const std::int64_t row = rows == 0 ? 0 : a.numel() / (batch * rows);
  for (const auto& ids : index) {
    if (static_cast<std::int64_t>(ids.size()) != m) throw ConfigError("gather_rows: ragged index lists");
    for (auto id : ids)
      if (id < 0 || id >= rows)
        throw ConfigError("gather_rows: index " + std::to_string(id) + " out of range for " + shape_str(a.shape()));
  }
  Shape out = a.shape();
  out[1] = m;
  std::vector<T> value(static_cast<std::size_t>(batch * m * row));
  const T* p = a.data();
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t j = 0; j < m; ++j) {
      const T* src = p + (b * rows + index[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)]) * row;
      std::copy(src, src + row, value.begin() + (b * m + j) * row);
    }
  return make_result<T>(std::move(out), std::move(value), {&a}, [index, rows, m, row](NodeT<T>& self) {
    NodeT<T>& in = *self.inputs[0];
    for (std::size_t b = 0; b < index.size(); ++b)
      for (std::int64_t j = 0; j < m; ++j) {
        T* dst = in.grad.data() + (static_cast<std::int64_t>(b) * rows + index[b][static_cast<std::size_t>(j)]) * row;
        const T* g = self.grad.data() + (static_cast<std::int64_t>(b) * m + j) * row;
        for (std::int64_t i = 0; i < row; ++i) dst[i] += g[i];
      }
  });
}

template <class T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (input.rank() < 1 || weight.rank() != 2 || input.size(-1) != weight.size(0) ||
      (bias.defined() && (bias.rank() != 1 || bias.size(0) != weight.size(1))))
    throw ConfigError("linear: input " + shape_str(input.shape()) + ", weight " + shape_str(weight.shape()) +
                      ", bias " + (bias.defined() ? shape_str(bias.shape()) : std::string("none")));
  const std::int64_t din = weight.size(0);
  const std::int64_t dout = weight.size(1);
  const std::int64_t rows = input.numel() / std::max<std::int64_t>(din, 1);
  Shape out = input.shape();
  out.back() = dout;
  std::vector<T> value(static_cast<std::size_t>(rows * dout));
  kernels::gemm<T>(rows, dout, din, input.data(), weight.data(), value.data(), false);
  if (bias.defined()) {
    const T* b = bias.data();
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t j = 0; j < dout; ++j) value[static_cast<std::size_t>(r * dout + j)] += b[j];
  }
  return make_result<T>(std::move(out), std::move(value), {&input, &weight, &bias},
                        [rows, din, dout](NodeT<T>& self) {
                          NodeT<T>& x = *self.inputs[0];
                          NodeT<T>& w = *self.inputs[1];
                          NodeT<T>& b = *self.inputs[2];
                          const T* g = self.grad.data();
                          if (x.requires_grad)
                            kernels::gemm_nt<T>(rows, din, dout, g, w.value.data(), x.grad.data(), true);
                          if (w.requires_grad)
                            kernels::gemm_tn<T>(din, dout, rows, x.value.data(), g, w.grad.data(), true);
                          if (b.requires_grad)
                            for (std::int64_t r = 0; r < rows; ++r)
                              for (std::int64_t j = 0; j < dout; ++j) b.grad[static_cast<std::size_t>(j)] += g[r * dout + j];
                        });
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const bool shared_b = b.rank() == 2;
  bool ok = a.rank() >= 2 && b.rank() >= 2 && a.size(-1) == b.size(-2);
  if (ok && !shared_b) {
    ok = a.rank() == b.rank();
    for (std::int64_t i = 0; ok && i < a.rank() - 2; ++i) ok = a.shape()[static_cast<std::size_t>(i)] == b.shape()[static_cast<std::size_t>(i)];
  }
  if (!ok) throw ConfigError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const std::int64_t m = a.size(-2), k = a.size(-1), n = b.size(-1);
  const std::int64_t batch = m * k == 0 ? 0 : a.numel() / (m * k);
  Shape out = a.shape();
  out.back() = n;
  std::vector<T> value(static_cast<std::size_t>(batch * m * n));
  if (shared_b) {
    kernels::gemm<T>(batch * m, n, k, a.data(), b.data(), value.data(), false);
  } else {
    for (std::int64_t i = 0; i < batch; ++i)
      kernels::gemm<T>(m, n, k, a.data() + i * m * k, b.data() + i * k * n, value.data() + i * m * n, false);
  }
  return make_result<T>(std::move(out), std::move(value), {&a, &b}, [batch, m, k, n, shared_b](NodeT<T>& self) {
    NodeT<T>& na = *self.inputs[0];
    NodeT<T>& nb = *self.inputs[1];
    const T* g = self.grad.data();
    if (shared_b) {
      if (na.requires_grad) kernels::gemm_nt<T>(batch * m, k, n, g, nb.value.data(), na.grad.data(), true);
      if (nb.requires_grad) kernels::gemm_tn<T>(k, n, batch * m, na.value.data(), g, nb.grad.data(), true);
      return;
    }
    for (std::int64_t i = 0; i < batch; ++i) {
      const T* gi = g + i * m * n;
      if (na.requires_grad)
        kernels::gemm_nt<T>(m, k, n, gi, nb.value.data() + i * k * n, na.grad.data() + i * m * k, true);
      if (nb.requires_grad)
        kernels::gemm_tn<T>(k, n, m, na.value.data() + i * m * k, gi, nb.grad.data() + i * k * n, true);
    }
  });
}

template <class T>
Tensor<T> softmax(const Tensor<T>& a, std::int64_t axis) {
  const std::int64_t ax = normalize_axis(axis, a.rank(), a.shape());
  const AxisSplit s = split_at(a.shape(), ax);
  std::vector<T> value(static_cast<std::size_t>(a.numel()));
  if (s.inner == 1) {
    kernels::softmax_rows<T>(s.outer, s.n, a.data(), value.data());
  } else {
    const T* p = a.data();
    for (std::int64_t o = 0; o < s.outer; ++o)
      for (std::int64_t i = 0; i < s.inner; ++i) {
        const std::int64_t base = o * s.n * s.inner + i;
        T mx = p[base];
        for (std::int64_t j = 1; j < s.n; ++j) mx = std::max(mx, p[base + j * s.inner]);
        T total = 0;
        for (std::int64_t j = 0; j < s.n; ++j) {
          const T e = std::exp(p[base + j * s.inner] - mx);
          value[static_cast<std::size_t>(base + j * s.inner)] = e;
          total += e;
        }
        const T inv = T(1) / total;
        for (std::int64_t j = 0; j < s.n; ++j) value[static_cast<std::size_t>(base + j * s.inner)] *= inv;
      }
  }
  return make_result<T>(a.shape(), std::move(value), {&a}, [s](NodeT<T>& self) {
    NodeT<T>& in = *self.inputs[0];
    if (s.inner == 1) {
      kernels::softmax_backward_rows<T>(s.outer, s.n, self.value.data(), self.grad.data(), in.grad.data());
      return;
    }
    const T* y = self.value.data();
    const T* g = self.grad.data();
    for (std::int64_t o = 0; o < s.outer; ++o)
      for (std::int64_t i = 0; i < s.inner; ++i) {
        const std::int64_t base = o * s.n * s.inner + i;
        T dot = 0;
        for (std::int64_t j = 0; j < s.n; ++j) dot += y[base + j * s.inner] * g[base + j * s.inner];
        for (std::int64_t j = 0; j < s.n; ++j) {
          const std::int64_t idx = base + j * s.inner;
          in.grad[static_cast<std::size_t>(idx)] += y[idx] * (g[idx] - dot);
        }
      }
  });
}

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::int64_t d = x.size(-1);
  if (gamma.rank() != 1 || beta.rank() != 1 || gamma.size(0) != d || beta.size(0) != d)
    throw ConfigError("layer_norm: input " + shape_str(x.shape()) + ", gamma " + shape_str(gamma.shape()) + ", beta " +
                      shape_str(beta.shape()));
  const std::int64_t rows = d == 0 ? 0 : x.numel() / d;
  auto xhat = std::make_shared<std::vector<T>>(static_cast<std::size_t>(x.numel()));
  auto rstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  std::vector<T> value(static_cast<std::size_t>(x.numel()));
  const T* p = x.data();
  const T* gm = gamma.data();
  const T* bt = beta.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = p + r * d;
    T mu = 0;
    for (std::int64_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::int64_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[static_cast<std::size_t>(r)] = rs;
    for (std::int64_t j = 0; j < d; ++j) {
      const T h = (xr[j] - mu) * rs;
      (*xhat)[static_cast<std::size_t>(r * d + j)] = h;
      value[static_cast<std::size_t>(r * d + j)] = h * gm[j] + bt[j];
    }
  }
  return make_result<T>(x.shape(), std::move(value), {&x, &gamma, &beta}, [xhat, rstd, rows, d](NodeT<T>& self) {
    NodeT<T>& nx = *self.inputs[0];
    NodeT<T>& ng = *self.inputs[1];
    NodeT<T>& nb = *self.inputs[2];
    const T* g = self.grad.data();
    const T* gm = ng.value.data();
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* gr = g + r * d;
      const T* hr = xhat->data() + r * d;
      if (ng.requires_grad)
        for (std::int64_t j = 0; j < d; ++j) ng.grad[static_cast<std::size_t>(j)] += gr[j] * hr[j];
      if (nb.requires_grad)
        for (std::int64_t j = 0; j < d; ++j) nb.grad[static_cast<std::size_t>(j)] += gr[j];
      if (nx.requires_grad) {
        T mean_dh = 0, mean_dh_h = 0;
        for (std::int64_t j = 0; j < d; ++j) {
          const T dh = gr[j] * gm[j];
          mean_dh += dh;
          mean_dh_h += dh * hr[j];
        }
        mean_dh /= static_cast<T>(d);
        mean_dh_h /= static_cast<T>(d);
        const T rs = (*rstd)[static_cast<std::size_t>(r)];
        T* dx = nx.grad.data() + r * d;
        for (std::int64_t j = 0; j < d; ++j) dx[j] += rs * (gr[j] * gm[j] - mean_dh - hr[j] * mean_dh_h);
      }
    }
  });
}

#define OCMAE_INSTANTIATE(T)                                                                      \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> div<T>(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                               \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                                          \
  template Tensor<T> square<T>(const Tensor<T>&);                                                 \
  template Tensor<T> log<T>(const Tensor<T>&);                                                    \
  template Tensor<T> exp<T>(const Tensor<T>&);                                                    \
  template Tensor<T> xlogx<T>(const Tensor<T>&);                                                  \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                                   \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                    \
  template Tensor<T> mean<T>(const Tensor<T>&);                                                   \
  template Tensor<T> sum<T>(const Tensor<T>&, std::int64_t, bool);                                \
  template Tensor<T> mean<T>(const Tensor<T>&, std::int64_t, bool);                               \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                         \
  template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<std::int64_t>&);              \
  template Tensor<T> transpose<T>(const Tensor<T>&, std::int64_t, std::int64_t);                  \
  template Tensor<T> broadcast_to<T>(const Tensor<T>&, const Shape&);                             \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, std::int64_t);                      \
  template Tensor<T> slice<T>(const Tensor<T>&, std::int64_t, std::int64_t, std::int64_t);        \
  template Tensor<T> gather_rows<T>(const Tensor<T>&, const std::vector<std::vector<std::int64_t>>&); \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::int64_t);                                  \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);

OCMAE_INSTANTIATE(float)
OCMAE_INSTANTIATE(double)
#undef OCMAE_INSTANTIATE

}  // namespace ocmae::ops
