#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ocmae/tensor.hpp"

namespace ocmae::metrics {

// Per-pixel segment ids in row-major order.
using Labeling = std::vector<std::int64_t>;

// Adjusted Rand index. With `exclude_truth_background`, pixels whose truth
// label equals `background` are dropped (predictions keep their labels on
// the remaining pixels). Returns 1.0 when both partitions are trivial.
double ari(std::span<const std::int64_t> pred, std::span<const std::int64_t> truth, bool exclude_truth_background,
           std::int64_t background = 0);

// Minimum-cost assignment on a rows x cols matrix (row-major). Returns, for
// each row, the assigned column or -1 when rows > cols leaves it unmatched.
std::vector<std::int64_t> hungarian(std::span<const double> costs, std::int64_t rows, std::int64_t cols);

// Mean over truth segments (background included) of the IoU with the
// matched predicted segment under the IoU-maximizing one-to-one matching.
double miou(std::span<const std::int64_t> pred, std::span<const std::int64_t> truth);

// masks [K, H, W] -> argmax over K, ties to the lowest slot.
template <class T>
Labeling labeling_from_masks(std::span<const T> masks, std::int64_t slots, std::int64_t pixels);

template <class T>
Labeling labeling_from_masks(const Tensor<T>& masks);

struct Scores {
  double ari = 0.0;
  double ari_fg = 0.0;
  double miou = 0.0;
};

Scores score(std::span<const std::int64_t> pred, std::span<const std::int64_t> truth);

}  // namespace ocmae::metrics
