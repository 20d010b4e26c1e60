#include "support.hpp"

#include <fstream>
#include <iterator>

namespace ocmae::testing {

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace ocmae::testing
