#include "lodsplat/mask.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lodsplat {

void Mask::validate() const {
  if (width != camera.width || height != camera.height) {
    throw std::invalid_argument("mask is " + std::to_string(width) + "x" + std::to_string(height) +
                                " but camera " + camera.id + " is " +
                                std::to_string(camera.width) + "x" + std::to_string(camera.height));
  }
  if (values.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("mask data size mismatch");
  }
}

Mask make_mask(const GrayImage& img, const CameraView& camera) {
  Mask m;
  m.width = img.width;
  m.height = img.height;
  m.camera = camera;
  m.camera.target.reset();
  m.values.resize(img.data.size());
  std::transform(img.data.begin(), img.data.end(), m.values.begin(),
                 [](std::uint8_t v) { return v >= 128 ? 1 : 0; });
  m.validate();
  return m;
}

Mask load_mask(const std::filesystem::path& png, const CameraView& camera) {
  return make_mask(read_png_gray(png), camera);
}

std::vector<std::uint32_t> select_faces(const Mesh& rest, const Mesh& keyframe, const Mask& mask) {
  require_same_topology(rest, keyframe);
  mask.validate();
  std::vector<std::uint8_t> inside(keyframe.vertex_count(), 0);
  for (std::size_t v = 0; v < keyframe.vertex_count(); ++v) {
    const PixelProjection p = project_vertex(mask.camera, keyframe.vertices[v]);
    if (p.behind) continue;
    const double px = std::floor(p.pixel.x() + 0.5), py = std::floor(p.pixel.y() + 0.5);
    if (!(px >= 0 && py >= 0 && px < mask.width && py < mask.height)) continue;
    inside[v] = mask.at(static_cast<int>(px), static_cast<int>(py)) ? 1 : 0;
  }
  std::vector<std::uint32_t> out;
  for (std::size_t f = 0; f < keyframe.face_count(); ++f) {
    const Face& face = keyframe.faces[f];
    if (inside[face[0]] && inside[face[1]] && inside[face[2]]) out.push_back(static_cast<std::uint32_t>(f));
  }
  return out;
}

std::vector<std::uint32_t> union_faces(const std::vector<std::vector<std::uint32_t>>& selections) {
  std::vector<std::uint32_t> out;
  for (const auto& s : selections) out.insert(out.end(), s.begin(), s.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace lodsplat
