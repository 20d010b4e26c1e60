#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ocmae/data.hpp"
#include "ocmae/model.hpp"
#include "ocmae/png_io.hpp"

namespace ocmae::viz {

constexpr std::int64_t kRows = 6;
constexpr std::int64_t kPad = 1;

// Fixed color for slot k; identical for every image and run.
Rgb slot_color(std::int64_t k);

std::int64_t grid_columns(std::int64_t slots);

// Six rows of H x W cells separated by kPad pixels: input, composed
// reconstruction, argmax segmentation, per-slot reconstructions over white
// using their masks, per-slot reconstructions without masks, and per-slot
// patch attention upsampled to pixels.
png::Image render_grid(const Model<float>& model, const std::uint8_t* image_rgb);

// Writes viz_%06d.png for the first n eval images (n clamped to the split
// size with a warning on `warn`). Returns the written paths.
std::vector<std::string> write_grids(const Model<float>& model, const Dataset& data, std::int64_t n,
                                     const std::string& out_dir, std::ostream* warn);

}  // namespace ocmae::viz
