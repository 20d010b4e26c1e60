#include "ocmae/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ocmae/errors.hpp"
#include "ocmae/png_io.hpp"

namespace ocmae {

namespace {

struct NamedShape {
  ShapeKind kind;
  const char* name;
};

constexpr NamedShape kShapeNames[] = {
    {ShapeKind::kSquare, "square"},          {ShapeKind::kCircle, "circle"},
    {ShapeKind::kTriangle, "triangle"},      {ShapeKind::kTetrominoL, "tetromino-L"},
    {ShapeKind::kTetrominoT, "tetromino-T"}, {ShapeKind::kBar, "bar"},
};

// Coverage bitmap of one shape before placement.
struct Sprite {
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::vector<std::uint8_t> on;

  bool at(std::int64_t y, std::int64_t x) const { return on[static_cast<std::size_t>(y * w + x)] != 0; }
  std::int64_t area() const { return std::count(on.begin(), on.end(), std::uint8_t{1}); }
};

Sprite blank(std::int64_t h, std::int64_t w) { return {h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h * w), 0)}; }

Sprite from_cells(const std::vector<std::pair<int, int>>& cells, int rows, int cols, std::int64_t cell) {
  Sprite s = blank(rows * cell, cols * cell);
  for (auto [r, c] : cells)
    for (std::int64_t y = r * cell; y < (r + 1) * cell; ++y)
      for (std::int64_t x = c * cell; x < (c + 1) * cell; ++x) s.on[static_cast<std::size_t>(y * s.w + x)] = 1;
  return s;
}

Sprite rotate90(const Sprite& s) {
  Sprite r = blank(s.w, s.h);
  for (std::int64_t y = 0; y < s.h; ++y)
    for (std::int64_t x = 0; x < s.w; ++x)
      r.on[static_cast<std::size_t>(x * r.w + (s.h - 1 - y))] = s.on[static_cast<std::size_t>(y * s.w + x)];
  return r;
}

Sprite rasterize(ShapeKind kind, std::int64_t size, Rng& rng) {
  Sprite s;
  const double half = static_cast<double>(size) / 2.0;
  switch (kind) {
    case ShapeKind::kSquare:
      s = blank(size, size);
      std::fill(s.on.begin(), s.on.end(), 1);
      return s;
    case ShapeKind::kCircle:
      s = blank(size, size);
      for (std::int64_t y = 0; y < size; ++y)
        for (std::int64_t x = 0; x < size; ++x) {
          const double dy = y + 0.5 - half, dx = x + 0.5 - half;
          s.on[static_cast<std::size_t>(y * size + x)] = dx * dx + dy * dy <= half * half;
        }
      return s;
    case ShapeKind::kTriangle:
      s = blank(size, size);
      for (std::int64_t y = 0; y < size; ++y) {
        const double reach = (y + 1.0) / static_cast<double>(size) * half;
        for (std::int64_t x = 0; x < size; ++x)
          s.on[static_cast<std::size_t>(y * size + x)] = std::abs(x + 0.5 - half) <= reach;
      }
      break;
    case ShapeKind::kTetrominoL:
      s = from_cells({{0, 0}, {1, 0}, {2, 0}, {2, 1}}, 3, 2, std::max<std::int64_t>(2, size / 3));
      if (rng.below(2)) {
        Sprite mirrored = blank(s.h, s.w);
        for (std::int64_t y = 0; y < s.h; ++y)
          for (std::int64_t x = 0; x < s.w; ++x) mirrored.on[static_cast<std::size_t>(y * s.w + x)] = s.at(y, s.w - 1 - x);
        s = mirrored;
      }
      break;
    case ShapeKind::kTetrominoT:
      s = from_cells({{0, 0}, {0, 1}, {0, 2}, {1, 1}}, 2, 3, std::max<std::int64_t>(2, size / 3));
      break;
    case ShapeKind::kBar:
      s = blank(std::max<std::int64_t>(2, size / 3), size);
      std::fill(s.on.begin(), s.on.end(), 1);
      break;
  }
  for (auto turns = rng.below(4); turns > 0; --turns) s = rotate90(s);
  return s;
}

std::string file_name(const char* prefix, std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%06lld.png", prefix, static_cast<long long>(index));
  return buf;
}

}  // namespace

const char* shape_name(ShapeKind kind) {
  for (const auto& s : kShapeNames)
    if (s.kind == kind) return s.name;
  return "?";
}

ShapeKind parse_shape(const std::string& name) {
  for (const auto& s : kShapeNames)
    if (name == s.name) return s.kind;
  throw ConfigError("unknown shape '" + name + "'");
}

void SceneSpec::validate() const {
  if (height < 4 || width < 4) throw ConfigError("scene resolution must be at least 4x4");
  if (shapes.empty()) throw ConfigError("scene.shapes must not be empty");
  if (min_objects < 1 || max_objects < min_objects) throw ConfigError("scene object count range must satisfy 1 <= min <= max");
  if (min_objects > 254 || max_objects > 254) throw ConfigError("scene.max_objects must fit an 8-bit mask");
  if (min_size < 2 || max_size < min_size) throw ConfigError("scene size range must satisfy 2 <= min <= max");
  if (max_size > std::min(height, width)) throw ConfigError("scene.max_size exceeds the image");
  if (static_cast<std::int64_t>(palette.size()) < max_objects)
    throw ConfigError("scene.palette needs at least scene.max_objects colors");
}

Sample generate_sample(const SceneSpec& spec, std::int64_t index) {
  Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(index)}));
  Sample out;
  out.height = spec.height;
  out.width = spec.width;
  const std::size_t npix = static_cast<std::size_t>(spec.height * spec.width);
  out.image.resize(npix * 3);
  out.mask.assign(npix, 0);

  Rgb bg;
  if (spec.background) {
    bg = *spec.background;
  } else {
    const auto level = static_cast<std::uint8_t>(rng.range(40, 200));
    bg = {level, level, level};
  }
  const std::int64_t n = rng.range(spec.min_objects, spec.max_objects);
  std::vector<std::size_t> colors(spec.palette.size());
  for (std::size_t i = 0; i < colors.size(); ++i) colors[i] = i;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i)
    std::swap(colors[i], colors[i + rng.below(colors.size() - i)]);

  // Raw depth label per pixel (index + 1 of the topmost object).
  std::vector<std::int64_t> owner(npix, 0);
  std::vector<Rgb> object_colors;
  for (std::int64_t obj = 0; obj < n; ++obj) {
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      const ShapeKind kind = spec.shapes[rng.below(spec.shapes.size())];
      const Sprite sprite = rasterize(kind, rng.range(spec.min_size, spec.max_size), rng);
      if (sprite.area() == 0 || sprite.h > spec.height || sprite.w > spec.width) continue;
      const std::int64_t y0 = rng.range(0, spec.height - sprite.h);
      const std::int64_t x0 = rng.range(0, spec.width - sprite.w);
      if (!spec.allow_overlap) {
        // Keep a one-pixel gap so separate objects never touch.
        bool clash = false;
        for (std::int64_t y = 0; y < sprite.h && !clash; ++y)
          for (std::int64_t x = 0; x < sprite.w && !clash; ++x) {
            if (!sprite.at(y, x)) continue;
            for (std::int64_t dy = -1; dy <= 1 && !clash; ++dy)
              for (std::int64_t dx = -1; dx <= 1 && !clash; ++dx) {
                const std::int64_t yy = y0 + y + dy, xx = x0 + x + dx;
                if (yy < 0 || xx < 0 || yy >= spec.height || xx >= spec.width) continue;
                clash = owner[static_cast<std::size_t>(yy * spec.width + xx)] != 0;
              }
          }
        if (clash) continue;
      }
      for (std::int64_t y = 0; y < sprite.h; ++y)
        for (std::int64_t x = 0; x < sprite.w; ++x)
          if (sprite.at(y, x)) owner[static_cast<std::size_t>((y0 + y) * spec.width + x0 + x)] = obj + 1;
      placed = true;
    }
    if (!placed)
      throw DataError("scene " + std::to_string(index) + ": could not place object " + std::to_string(obj + 1) +
                      " after 100 tries");
    object_colors.push_back(spec.palette[colors[static_cast<std::size_t>(obj)]]);
  }

  // Drop fully occluded objects, keeping depth order among the rest.
  std::vector<std::int64_t> visible(static_cast<std::size_t>(n + 1), 0);
  for (auto o : owner) visible[static_cast<std::size_t>(o)] = 1;
  std::vector<std::uint8_t> relabel(static_cast<std::size_t>(n + 1), 0);
  for (std::int64_t o = 1; o <= n; ++o)
    if (visible[static_cast<std::size_t>(o)]) relabel[static_cast<std::size_t>(o)] = static_cast<std::uint8_t>(++out.objects);

  for (std::size_t p = 0; p < npix; ++p) {
    const auto o = owner[p];
    out.mask[p] = relabel[static_cast<std::size_t>(o)];
    const Rgb& c = o == 0 ? bg : object_colors[static_cast<std::size_t>(o - 1)];
    std::copy(c.begin(), c.end(), out.image.begin() + static_cast<std::ptrdiff_t>(3 * p));
  }
  return out;
}

void generate(const SceneSpec& spec, std::int64_t count, const std::string& dir) {
  spec.validate();
  if (count < 0) throw ConfigError("count must be non-negative");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
  const std::filesystem::path root(dir);

  std::vector<std::string> errors(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      const Sample s = generate_sample(spec, i);
      png::write((root / file_name("img", i)).string(),
                 {static_cast<int>(s.width), static_cast<int>(s.height), 3, s.image});
      png::write((root / file_name("mask", i)).string(),
                 {static_cast<int>(s.width), static_cast<int>(s.height), 1, s.mask});
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw DataError(e);

  const auto manifest_path = (root / "manifest.txt").string();
  std::ofstream manifest(manifest_path, std::ios::binary);
  if (!manifest) throw DataError("cannot write " + manifest_path);
  for (std::int64_t i = 0; i < count; ++i) manifest << file_name("img", i) << '\t' << file_name("mask", i) << '\n';
  if (!manifest.flush()) throw DataError("failed writing " + manifest_path);
}

DatasetSplit load(const std::string& dir, double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ConfigError("data.split must be in [0, 1]");
  const std::filesystem::path root(dir);
  const auto manifest_path = (root / "manifest.txt").string();
  std::ifstream manifest(manifest_path);
  if (!manifest) throw DataError("missing dataset manifest " + manifest_path);

  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  while (std::getline(manifest, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(manifest_path + ": malformed line '" + line + "'");
    entries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }

  const auto n = static_cast<std::int64_t>(entries.size());
  const auto n_train = std::clamp<std::int64_t>(std::llround(static_cast<double>(n) * train_fraction), 0, n);
  DatasetSplit split;
  for (std::int64_t i = 0; i < n; ++i) {
    Dataset& target = i < n_train ? split.train : split.eval;
    const auto img_path = (root / entries[static_cast<std::size_t>(i)].first).string();
    const auto mask_path = (root / entries[static_cast<std::size_t>(i)].second).string();
    const png::Image img = png::read(img_path);
    const png::Image mask = png::read(mask_path);
    if (img.channels != 3) throw DataError(img_path + ": expected an RGB image");
    if (mask.channels != 1) throw DataError(mask_path + ": expected a grayscale mask");
    if (mask.width != img.width || mask.height != img.height)
      throw DataError(mask_path + ": size differs from " + img_path);
    if (i == 0) {
      for (Dataset* d : {&split.train, &split.eval}) {
        d->height = img.height;
        d->width = img.width;
      }
    } else if (img.height != target.height || img.width != target.width) {
      throw DataError(img_path + ": image size differs from the rest of the dataset");
    }
    target.names.push_back(entries[static_cast<std::size_t>(i)].first);
    target.images.insert(target.images.end(), img.pixels.begin(), img.pixels.end());
    target.masks.insert(target.masks.end(), mask.pixels.begin(), mask.pixels.end());
  }
  return split;
}

template <class T>
Tensor<T> make_batch(const Dataset& data, const std::vector<std::int64_t>& indices) {
  const std::int64_t per = data.pixels() * 3;
  std::vector<T> values(static_cast<std::size_t>(per) * indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::int64_t i = indices[b];
    if (i < 0 || i >= data.size()) throw ConfigError("batch index out of range");
    const std::uint8_t* src = data.images.data() + i * per;
    for (std::int64_t j = 0; j < per; ++j)
      values[b * static_cast<std::size_t>(per) + static_cast<std::size_t>(j)] = static_cast<T>(src[j]) / T(255);
  }
  return Tensor<T>({static_cast<std::int64_t>(indices.size()), data.height, data.width, 3}, std::move(values));
}

template Tensor<float> make_batch<float>(const Dataset&, const std::vector<std::int64_t>&);
template Tensor<double> make_batch<double>(const Dataset&, const std::vector<std::int64_t>&);

std::vector<std::int64_t> shuffled_indices(std::int64_t n, Rng& rng) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (std::int64_t i = n - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)], order[rng.below(static_cast<std::uint64_t>(i + 1))]);
  return order;
}

std::vector<std::vector<std::int64_t>> make_batches(const std::vector<std::int64_t>& order, std::int64_t batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  std::vector<std::vector<std::int64_t>> out;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size))
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + static_cast<std::size_t>(batch_size))));
  return out;
}

}  // namespace ocmae
