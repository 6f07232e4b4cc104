#pragma once

#include "lodsplat/image.hpp"
#include "lodsplat/math.hpp"

#include <optional>
#include <string>

namespace lodsplat {

/// Pinhole camera. World-to-camera is x_cam = rotation * x_world + translation
/// with x right, y down and z forward; pixel (i, j) is centered at (i, j).
struct CameraView {
  std::string id;
  double fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 0, height = 0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  std::optional<Image> target;

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 center() const { return -rotation.transpose() * translation; }

  /// Throws std::invalid_argument unless fx, fy > 0 and the principal point
  /// lies inside the image.
  void validate() const;
};

/// Camera at `eye` looking at `target` with the given world up direction.
/// Falls back to +z as up when the view direction is parallel to `up`.
CameraView look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double vertical_fov_rad,
                   int width, int height);

/// Homogeneous projection [u v w]^T = K [R|T] [x 1]^T.
struct PixelProjection {
  Vec2 pixel = Vec2::Zero();
  double depth = 0;
  bool behind = false;
};

PixelProjection project_vertex(const CameraView& cam, const Vec3& world);

}  // namespace lodsplat
