#include "ocmae/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>

#include "ocmae/errors.hpp"

namespace ocmae::png {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void on_error(png_structp ptr, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(ptr));
  if (what) *what = msg;
  png_longjmp(ptr, 1);
}

void on_warning(png_structp, png_const_charp) {}

}  // namespace

void write(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw DataError(path + ": unsupported channel count");
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * image.channels)
    throw DataError(path + ": pixel buffer size does not match dimensions");
  File file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot open " + path + " for writing");

  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, on_error, on_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError(path + ": cannot initialize PNG encoder");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError(path + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
  png_set_compression_level(png, 6);
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y)
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(image.pixels.data() + stride * y);
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw DataError("failed writing " + path);
}

Image read(const std::string& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open " + path);
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    throw DataError(path + ": not a PNG file");

  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, on_error, on_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path + ": cannot initialize PNG decoder");
  }
  Image image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path + ": corrupt PNG (" + message + ")");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = color == PNG_COLOR_TYPE_RGB ? 3 : color == PNG_COLOR_TYPE_GRAY ? 1 : 0;
  if (bit_depth != 8 || image.channels == 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path + ": expected 8-bit gray or RGB PNG");
  }
  png_bytepp rows = png_get_rows(png, info);
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  image.pixels.resize(stride * image.height);
  for (int y = 0; y < image.height; ++y)
    std::copy(rows[y], rows[y] + stride, image.pixels.begin() + static_cast<std::ptrdiff_t>(stride * y));
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

}  // namespace ocmae::png
