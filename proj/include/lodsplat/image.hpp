#pragma once

#include "lodsplat/math.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace lodsplat {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved RGB image, row-major, values nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height * 3, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  double at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  Vec3 rgb(int x, int y) const {
    const double* p = &data_[(static_cast<std::size_t>(y) * width_ + x) * 3];
    return {p[0], p[1], p[2]};
  }
  void set_rgb(int x, int y, const Vec3& v) {
    double* p = &data_[(static_cast<std::size_t>(y) * width_ + x) * 3];
    p[0] = v.x();
    p[1] = v.y();
    p[2] = v.z();
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Single-channel 8-bit image (masks).
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

/// Bilinear lookup with texel centers at (i + 0.5) / size, clamped at the
/// borders. v = 0 is the bottom row (OBJ convention).
Vec3 sample_bilinear(const Image& tex, double u, double v);

/// 8-bit RGB PNG. Values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);
GrayImage read_png_gray(const std::filesystem::path& path);
void write_png_gray(const std::filesystem::path& path, const GrayImage& img);

/// Round-trip an image through 8-bit quantization.
Image quantize_8bit(const Image& img);

}  // namespace lodsplat
