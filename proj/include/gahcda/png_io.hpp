#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gahcda {

/// Grayscale PNG contents widened to 16 bits. `bit_depth` is the stored depth.
struct RawGray {
  int height = 0;
  int width = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> values;
};

/// Reads 8- or 16-bit PNGs; color inputs are converted to luminance.
RawGray read_png_gray(const std::filesystem::path& path);

void write_png_gray16(const std::filesystem::path& path, int height, int width,
                      std::span<const std::uint16_t> values);
void write_png_gray8(const std::filesystem::path& path, int height, int width,
                     std::span<const std::uint8_t> values);

}  // namespace gahcda
