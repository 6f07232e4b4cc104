#include "lodsplat/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace lodsplat {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

// Reads any PNG into 8-bit RGB or gray depending on `want_gray`.
std::vector<std::uint8_t> decode_png(const std::filesystem::path& path, bool want_gray,
                                     int& width, int& height) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw IoError("libpng init failed");
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("malformed PNG: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  const bool is_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (want_gray && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (!want_gray && is_gray) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = pixels.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

void encode_png(const std::filesystem::path& path, const std::uint8_t* pixels, int width,
                int height, bool gray) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, 8, gray ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * (gray ? 1 : 3);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + stride * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Vec3 sample_bilinear(const Image& tex, double u, double v) {
  const double fx = u * tex.width() - 0.5;
  const double fy = (1.0 - v) * tex.height() - 0.5;
  const double x0f = std::floor(fx), y0f = std::floor(fy);
  const double tx = fx - x0f, ty = fy - y0f;
  auto clamp_x = [&](double x) { return std::clamp(static_cast<int>(x), 0, tex.width() - 1); };
  auto clamp_y = [&](double y) { return std::clamp(static_cast<int>(y), 0, tex.height() - 1); };
  const int x0 = clamp_x(x0f), x1 = clamp_x(x0f + 1);
  const int y0 = clamp_y(y0f), y1 = clamp_y(y0f + 1);
  return (1 - ty) * ((1 - tx) * tex.rgb(x0, y0) + tx * tex.rgb(x1, y0)) +
         ty * ((1 - tx) * tex.rgb(x0, y1) + tx * tex.rgb(x1, y1));
}

void write_png(const std::filesystem::path& path, const Image& img) {
  std::vector<std::uint8_t> bytes(img.data().size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), to_byte);
  encode_png(path, bytes.data(), img.width(), img.height(), false);
}

Image read_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = decode_png(path, false, w, h);
  Image img(w, h);
  for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = bytes[i] / 255.0;
  return img;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  GrayImage g;
  g.data = decode_png(path, true, g.width, g.height);
  return g;
}

void write_png_gray(const std::filesystem::path& path, const GrayImage& img) {
  encode_png(path, img.data.data(), img.width, img.height, true);
}

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace lodsplat
