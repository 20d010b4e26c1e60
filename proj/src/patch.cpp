#include "ocmae/patch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ocmae/errors.hpp"
#include "ocmae/ops.hpp"

namespace ocmae {

std::int64_t unmasked_count(std::int64_t n_total, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError("mask ratio must be in [0, 1), got " + std::to_string(ratio));
  const auto kept = static_cast<std::int64_t>(std::llround(static_cast<double>(n_total) * (1.0 - ratio)));
  return std::clamp<std::int64_t>(kept, 1, n_total);
}

namespace {

MaskDraw from_orders(std::vector<std::vector<std::int64_t>> orders, std::int64_t n_total, std::int64_t n_unmasked) {
  MaskDraw draw;
  draw.n_total = n_total;
  draw.n_unmasked = n_unmasked;
  for (auto& order : orders) {
    std::vector<std::int64_t> restore(static_cast<std::size_t>(n_total));
    for (std::int64_t pos = 0; pos < n_total; ++pos) restore[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos;
    draw.unmasked_ids.emplace_back(order.begin(), order.begin() + n_unmasked);
    draw.masked_ids.emplace_back(order.begin() + n_unmasked, order.end());
    draw.restore.push_back(std::move(restore));
  }
  return draw;
}

}  // namespace

MaskDraw draw_mask(std::int64_t batch, std::int64_t n_total, double ratio, Rng& rng) {
  const std::int64_t kept = unmasked_count(n_total, ratio);
  std::vector<std::vector<std::int64_t>> orders(static_cast<std::size_t>(batch));
  for (auto& order : orders) {
    order.resize(static_cast<std::size_t>(n_total));
    std::iota(order.begin(), order.end(), 0);
    if (kept == n_total) continue;
    for (std::int64_t i = n_total - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
  }
  return from_orders(std::move(orders), n_total, kept);
}

MaskDraw full_view(std::int64_t batch, std::int64_t n_total) {
  std::vector<std::vector<std::int64_t>> orders(static_cast<std::size_t>(batch));
  for (auto& order : orders) {
    order.resize(static_cast<std::size_t>(n_total));
    std::iota(order.begin(), order.end(), 0);
  }
  return from_orders(std::move(orders), n_total, n_total);
}

template <class T>
Tensor<T> patchify(const Tensor<T>& images, std::int64_t patch) {
  if (images.rank() != 4) throw ConfigError("patchify expects [B, H, W, C], got " + shape_str(images.shape()));
  const std::int64_t b = images.size(0), h = images.size(1), w = images.size(2), c = images.size(3);
  if (patch <= 0 || h % patch != 0 || w % patch != 0)
    throw ConfigError("image " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible into " +
                      std::to_string(patch) + "x" + std::to_string(patch) + " patches");
  const std::int64_t gh = h / patch, gw = w / patch;
  auto grid = ops::reshape(images, {b, gh, patch, gw, patch, c});
  return ops::reshape(ops::permute(grid, {0, 1, 3, 2, 4, 5}), {b, gh * gw, patch * patch * c});
}

template <class T>
Tensor<T> unpatchify(const Tensor<T>& patches, std::int64_t height, std::int64_t width, std::int64_t channels,
                     std::int64_t patch) {
  if (patch <= 0 || height % patch != 0 || width % patch != 0)
    throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) + " is not divisible into " +
                      std::to_string(patch) + "x" + std::to_string(patch) + " patches");
  const std::int64_t gh = height / patch, gw = width / patch;
  if (patches.rank() != 3 || patches.size(1) != gh * gw || patches.size(2) != patch * patch * channels)
    throw ConfigError("unpatchify: unexpected patch tensor " + shape_str(patches.shape()));
  const std::int64_t b = patches.size(0);
  auto grid = ops::reshape(patches, {b, gh, gw, patch, patch, channels});
  return ops::reshape(ops::permute(grid, {0, 1, 3, 2, 4, 5}), {b, height, width, channels});
}

template <class T>
Tensor<T> positional_encoding(std::int64_t grid_h, std::int64_t grid_w, std::int64_t dim) {
  if (dim <= 0 || dim % 2 != 0)
    throw ConfigError("positional encoding dimension must be even and positive, got " + std::to_string(dim));
  const std::int64_t half = dim / 2;
  std::vector<T> table(static_cast<std::size_t>(grid_h * grid_w * dim));
  auto encode = [half](double pos, std::int64_t j) {
    const std::int64_t i = j / 2;
    const double omega = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(half));
    return j % 2 == 0 ? std::sin(pos * omega) : std::cos(pos * omega);
  };
  for (std::int64_t r = 0; r < grid_h; ++r)
    for (std::int64_t c = 0; c < grid_w; ++c) {
      T* row = table.data() + (r * grid_w + c) * dim;
      for (std::int64_t j = 0; j < half; ++j) {
        row[j] = static_cast<T>(encode(static_cast<double>(r), j));
        row[half + j] = static_cast<T>(encode(static_cast<double>(c), j));
      }
    }
  return Tensor<T>({grid_h * grid_w, dim}, std::move(table));
}

template <class T>
Tensor<T> positional_encoding(std::int64_t n_total, std::int64_t dim) {
  const auto side = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(n_total))));
  if (side * side != n_total)
    throw ConfigError("positional encoding for " + std::to_string(n_total) + " patches needs explicit grid extents");
  return positional_encoding<T>(side, side, dim);
}

template <class T>
PatchState<T> apply_mask(const Tensor<T>& tokens, MaskDraw draw) {
  if (tokens.rank() != 3 || tokens.size(0) != draw.batch() || tokens.size(1) != draw.n_total)
    throw ConfigError("mask draw for " + std::to_string(draw.batch()) + "x" + std::to_string(draw.n_total) +
                      " does not fit tokens " + shape_str(tokens.shape()));
  PatchState<T> state;
  state.tokens_unmasked = ops::gather_rows(tokens, draw.unmasked_ids);
  state.draw = std::move(draw);
  return state;
}

template <class T>
PatchState<T> random_mask(const Tensor<T>& tokens, double ratio, Rng& rng) {
  return apply_mask(tokens, draw_mask(tokens.size(0), tokens.size(1), ratio, rng));
}

#define OCMAE_INSTANTIATE(T)                                                                          \
  template Tensor<T> patchify<T>(const Tensor<T>&, std::int64_t);                                     \
  template Tensor<T> unpatchify<T>(const Tensor<T>&, std::int64_t, std::int64_t, std::int64_t, std::int64_t); \
  template Tensor<T> positional_encoding<T>(std::int64_t, std::int64_t, std::int64_t);                \
  template Tensor<T> positional_encoding<T>(std::int64_t, std::int64_t);                              \
  template PatchState<T> apply_mask<T>(const Tensor<T>&, MaskDraw);                                   \
  template PatchState<T> random_mask<T>(const Tensor<T>&, double, Rng&);

OCMAE_INSTANTIATE(float)
OCMAE_INSTANTIATE(double)
#undef OCMAE_INSTANTIATE

}  // namespace ocmae
