#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ocmae::png {

struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

// Encoder settings are fixed (no interlace, no filtering, zlib level 6, no
// time chunk) so equal pixels give equal bytes.
void write(const std::string& path, const Image& image);

// Decodes 8-bit gray or RGB files; anything else throws DataError.
Image read(const std::string& path);

}  // namespace ocmae::png
