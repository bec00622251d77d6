#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gsmax::app {

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3
};

/// Binary "P6" with maxval 255.
std::vector<std::uint8_t> encode_ppm(const RgbImage& image);

/// Inverse of encode_ppm (also accepts comments and arbitrary whitespace in
/// the header). Throws FormatError.
RgbImage decode_ppm(std::span<const std::uint8_t> bytes);

void write_ppm(const std::filesystem::path& path, const RgbImage& image);

}  // namespace gsmax::app
