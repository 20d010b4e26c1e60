#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ocmae/rng.hpp"
#include "ocmae/tensor.hpp"

namespace ocmae {

enum class ShapeKind { kSquare, kCircle, kTriangle, kTetrominoL, kTetrominoT, kBar };

const char* shape_name(ShapeKind kind);
ShapeKind parse_shape(const std::string& name);

using Rgb = std::array<std::uint8_t, 3>;

struct SceneSpec {
  std::int64_t height = 35;
  std::int64_t width = 35;
  std::vector<ShapeKind> shapes{ShapeKind::kSquare,     ShapeKind::kCircle,     ShapeKind::kTriangle,
                                ShapeKind::kTetrominoL, ShapeKind::kTetrominoT, ShapeKind::kBar};
  std::int64_t min_objects = 3;
  std::int64_t max_objects = 3;
  // Bounding-box extent of a shape in pixels, drawn uniformly per object.
  std::int64_t min_size = 8;
  std::int64_t max_size = 12;
  std::vector<Rgb> palette{{{230, 25, 75}},  {{60, 180, 75}},  {{255, 225, 25}}, {{0, 130, 200}},
                           {{245, 130, 48}}, {{145, 30, 180}}, {{70, 240, 240}}, {{240, 50, 230}}};
  // Unset means a random gray level per scene.
  std::optional<Rgb> background = Rgb{0, 0, 0};
  bool allow_overlap = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Sample {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> image;  // H*W*3
  std::vector<std::uint8_t> mask;   // H*W, 0 = background, 1..n in depth order
  std::int64_t objects = 0;
};

// Pure function of (spec, index).
Sample generate_sample(const SceneSpec& spec, std::int64_t index);

// Writes manifest.txt and img_/mask_ PNG pairs into `dir` (created if needed).
void generate(const SceneSpec& spec, std::int64_t count, const std::string& dir);

struct Dataset {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::string> names;    // image file names, manifest order
  std::vector<std::uint8_t> images;  // N*H*W*3
  std::vector<std::uint8_t> masks;   // N*H*W

  std::int64_t size() const { return static_cast<std::int64_t>(names.size()); }
  std::int64_t pixels() const { return height * width; }
  const std::uint8_t* mask(std::int64_t i) const { return masks.data() + i * pixels(); }
};

struct DatasetSplit {
  Dataset train;
  Dataset eval;
};

// The first round(N * train_fraction) manifest entries train, the rest evaluate.
DatasetSplit load(const std::string& dir, double train_fraction);

// [B, H, W, 3] with values byte / 255.
template <class T>
Tensor<T> make_batch(const Dataset& data, const std::vector<std::int64_t>& indices);

// Random permutation of [0, n).
std::vector<std::int64_t> shuffled_indices(std::int64_t n, Rng& rng);

// Batches of `batch_size` over `order`; the last batch may be short.
std::vector<std::vector<std::int64_t>> make_batches(const std::vector<std::int64_t>& order, std::int64_t batch_size);

}  // namespace ocmae
