#include "gsmax/app/ppm.hpp"

#include <cctype>
#include <string>

#include "gsmax/checkpoint.hpp"
#include "gsmax/errors.hpp"

namespace gsmax::app {

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
  if (image.rgb.size() != image.width * image.height * 3) throw ShapeError("image buffer does not match its size");
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto number = [&] {
    skip_space();
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) throw FormatError("PPM header: expected a number");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError("not a binary PPM (P6)");
  pos = 2;
  RgbImage img;
  img.width = number();
  img.height = number();
  if (number() != 255) throw FormatError("PPM maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("PPM header not terminated");
  ++pos;
  const std::size_t n = img.width * img.height * 3;
  if (bytes.size() - pos != n) throw FormatError("PPM pixel data has the wrong length");
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  write_file_bytes(path, encode_ppm(image));
}

}  // namespace gsmax::app
