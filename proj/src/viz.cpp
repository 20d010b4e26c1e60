#include "ocmae/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>

#include "ocmae/errors.hpp"
#include "ocmae/metrics.hpp"
#include "ocmae/trainer.hpp"

namespace ocmae::viz {

namespace {

constexpr Rgb kPalette[] = {{{31, 119, 180}}, {{255, 127, 14}}, {{44, 160, 44}},  {{214, 39, 40}},
                            {{148, 103, 189}}, {{140, 86, 75}}, {{227, 119, 194}}, {{127, 127, 127}},
                            {{188, 189, 34}}, {{23, 190, 207}}, {{255, 255, 255}}, {{0, 0, 0}}};

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

class Canvas {
 public:
  Canvas(std::int64_t cols, std::int64_t h, std::int64_t w) : h_(h), w_(w) {
    image_.width = static_cast<int>(cols * w + (cols + 1) * kPad);
    image_.height = static_cast<int>(kRows * h + (kRows + 1) * kPad);
    image_.channels = 3;
    image_.pixels.assign(static_cast<std::size_t>(image_.width) * image_.height * 3, 96);
  }

  void put(std::int64_t row, std::int64_t col, std::int64_t y, std::int64_t x, const Rgb& c) {
    const std::int64_t py = row * (h_ + kPad) + kPad + y;
    const std::int64_t px = col * (w_ + kPad) + kPad + x;
    std::copy(c.begin(), c.end(), image_.pixels.begin() + (py * image_.width + px) * 3);
  }

  png::Image take() { return std::move(image_); }

 private:
  std::int64_t h_, w_;
  png::Image image_;
};

}  // namespace

Rgb slot_color(std::int64_t k) {
  constexpr auto n = static_cast<std::int64_t>(std::size(kPalette));
  if (k < n) return kPalette[k];
  // Beyond the table, spread hues deterministically.
  const double hue = std::fmod(static_cast<double>(k) * 0.6180339887498949, 1.0) * 6.0;
  const double f = hue - std::floor(hue);
  const double rgb[6][3] = {{1, f, 0}, {1 - f, 1, 0}, {0, 1, f}, {0, 1 - f, 1}, {f, 0, 1}, {1, 0, 1 - f}};
  const auto& c = rgb[static_cast<int>(hue) % 6];
  return {to_byte(c[0]), to_byte(c[1]), to_byte(c[2])};
}

std::int64_t grid_columns(std::int64_t slots) { return std::max<std::int64_t>(3, slots); }

png::Image render_grid(const Model<float>& model, const std::uint8_t* image_rgb) {
  const auto& c = model.config();
  if (c.channels != 3) throw ConfigError("visualization needs a 3-channel model");
  const std::int64_t h = c.height, w = c.width, k = c.slots, pixels = h * w;
  std::vector<float> values(static_cast<std::size_t>(pixels * 3));
  for (std::int64_t i = 0; i < pixels * 3; ++i) values[static_cast<std::size_t>(i)] = image_rgb[i] / 255.0f;
  const auto result = infer(model, Tensor<float>({1, h, w, 3}, std::move(values)));
  const auto composed = result.scene.composed.values();
  const auto masks = result.scene.masks.values();
  const auto rgb = result.scene.per_slot_rgb.values();
  const auto attn = result.slot_state.attn.values();  // [1, N, K]
  const auto labels = metrics::labeling_from_masks<float>(masks, k, pixels);

  Canvas canvas(grid_columns(k), h, w);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      const std::int64_t p = y * w + x;
      canvas.put(0, 0, y, x, {image_rgb[3 * p], image_rgb[3 * p + 1], image_rgb[3 * p + 2]});
      canvas.put(1, 0, y, x,
                 {to_byte(composed[3 * p]), to_byte(composed[3 * p + 1]), to_byte(composed[3 * p + 2])});
      canvas.put(2, 0, y, x, slot_color(labels[static_cast<std::size_t>(p)]));
      const std::int64_t patch = (y / c.patch) * c.grid_w() + x / c.patch;
      for (std::int64_t s = 0; s < k; ++s) {
        const double m = masks[static_cast<std::size_t>(s * pixels + p)];
        const auto* px = &rgb[static_cast<std::size_t>((s * pixels + p) * 3)];
        canvas.put(3, s, y, x,
                   {to_byte(m * px[0] + (1 - m)), to_byte(m * px[1] + (1 - m)), to_byte(m * px[2] + (1 - m))});
        canvas.put(4, s, y, x, {to_byte(px[0]), to_byte(px[1]), to_byte(px[2])});
        const auto a = to_byte(attn[static_cast<std::size_t>(patch * k + s)]);
        canvas.put(5, s, y, x, {a, a, a});
      }
    }
  return canvas.take();
}

std::vector<std::string> write_grids(const Model<float>& model, const Dataset& data, std::int64_t n,
                                     const std::string& out_dir, std::ostream* warn) {
  if (n < 1) throw ConfigError("--n must be at least 1");
  if (data.height != model.config().height || data.width != model.config().width)
    throw ConfigError("dataset image size does not match the model");
  if (n > data.size()) {
    if (warn) *warn << "warning: --n " << n << " exceeds the " << data.size() << " available images; using "
                    << data.size() << "\n";
    n = data.size();
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir + ": " + ec.message());
  std::vector<std::string> paths;
  for (std::int64_t i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "viz_%06lld.png", static_cast<long long>(i));
    const auto path = (std::filesystem::path(out_dir) / name).string();
    png::write(path, render_grid(model, data.images.data() + i * data.pixels() * 3));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace ocmae::viz
