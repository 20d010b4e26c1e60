#pragma once

#include <cstdint>
#include <vector>

#include "ocmae/rng.hpp"
#include "ocmae/tensor.hpp"

namespace ocmae {

// Index partition for one masking draw. For every batch item, the encoder
// sees `unmasked_ids` (in that order); `restore[j]` is the position of patch j
// within the sequence unmasked_ids ++ masked_ids.
struct MaskDraw {
  std::int64_t n_total = 0;
  std::int64_t n_unmasked = 0;
  std::vector<std::vector<std::int64_t>> unmasked_ids;
  std::vector<std::vector<std::int64_t>> masked_ids;
  std::vector<std::vector<std::int64_t>> restore;

  std::int64_t batch() const { return static_cast<std::int64_t>(unmasked_ids.size()); }
  std::int64_t n_masked() const { return n_total - n_unmasked; }
};

template <class T>
struct PatchState {
  Tensor<T> tokens_unmasked;  // [B, n_unmasked, D]
  MaskDraw draw;
};

// round(n_total * (1 - ratio)), kept at least 1 so the encoder always sees a patch.
std::int64_t unmasked_count(std::int64_t n_total, double ratio);

// Independent uniform draw without replacement per batch item.
MaskDraw draw_mask(std::int64_t batch, std::int64_t n_total, double ratio, Rng& rng);

// Ratio-0 partition in natural patch order.
MaskDraw full_view(std::int64_t batch, std::int64_t n_total);

// [B, H, W, C] -> [B, (H/P)*(W/P), P*P*C], patches in row-major grid order.
template <class T>
Tensor<T> patchify(const Tensor<T>& images, std::int64_t patch);

// Inverse of patchify for [B, N, P*P*C] with an image of height x width x channels.
template <class T>
Tensor<T> unpatchify(const Tensor<T>& patches, std::int64_t height, std::int64_t width, std::int64_t channels,
                     std::int64_t patch);

// Fixed 2-D sine-cosine table [grid_h * grid_w, dim]: the first dim/2
// channels encode the grid row, the rest the grid column.
template <class T>
Tensor<T> positional_encoding(std::int64_t grid_h, std::int64_t grid_w, std::int64_t dim);

// Square-grid convenience form; n_total must be a perfect square.
template <class T>
Tensor<T> positional_encoding(std::int64_t n_total, std::int64_t dim);

template <class T>
PatchState<T> apply_mask(const Tensor<T>& tokens, MaskDraw draw);

template <class T>
PatchState<T> random_mask(const Tensor<T>& tokens, double ratio, Rng& rng);

}  // namespace ocmae
