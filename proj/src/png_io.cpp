#include "gahcda/png_io.hpp"

#include <png.h>

#include <cstring>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "gahcda/core.hpp"

namespace gahcda {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

}  // namespace

RawGray read_png_gray(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path.string());
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng allocation failed");
  }

  RawGray out;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG: " + path.string());
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  if (depth == 16) png_set_swap(png);  // native little-endian uint16 rows
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (int r = 0; r < out.height; ++r) rows[r] = buffer.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out.values.resize(static_cast<std::size_t>(out.height) * out.width);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * out.width + c;
      if (out.bit_depth == 16) {
        std::uint16_t v;
        std::memcpy(&v, rows[r] + 2 * c, 2);
        out.values[i] = v;
      } else {
        out.values[i] = rows[r][c];
      }
    }
  }
  return out;
}

namespace {

void write_png(const std::filesystem::path& path, int height, int width, int depth, const png_byte* data) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng allocation failed");
  }
  std::vector<png_bytep> rows(height);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * (depth / 8);
  for (int r = 0; r < height; ++r) rows[r] = const_cast<png_bytep>(data + r * rowbytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray16(const std::filesystem::path& path, int height, int width,
                      std::span<const std::uint16_t> values) {
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw ValidationError("PNG value count does not match dimensions");
  }
  write_png(path, height, width, 16, reinterpret_cast<const png_byte*>(values.data()));
}

void write_png_gray8(const std::filesystem::path& path, int height, int width,
                     std::span<const std::uint8_t> values) {
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw ValidationError("PNG value count does not match dimensions");
  }
  write_png(path, height, width, 8, values.data());
}

}  // namespace gahcda
