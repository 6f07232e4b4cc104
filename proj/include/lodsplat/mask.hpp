#pragma once

#include "lodsplat/camera.hpp"
#include "lodsplat/image.hpp"
#include "lodsplat/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lodsplat {

/// Binary image mask seen from one camera.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;  // 1 = enhance
  CameraView camera;

  bool at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x] != 0; }

  /// Throws std::invalid_argument when the size differs from the camera's.
  void validate() const;
};

/// Thresholds a grayscale image at 128.
Mask make_mask(const GrayImage& img, const CameraView& camera);
Mask load_mask(const std::filesystem::path& png, const CameraView& camera);

/// Faces of `keyframe` whose three vertices project in front of the camera
/// onto set mask pixels (nearest pixel, halves round up). No occlusion test.
/// Indices are ascending.
std::vector<std::uint32_t> select_faces(const Mesh& rest, const Mesh& keyframe, const Mask& mask);

/// Sorted union of several selections.
std::vector<std::uint32_t> union_faces(const std::vector<std::vector<std::uint32_t>>& selections);

}  // namespace lodsplat
