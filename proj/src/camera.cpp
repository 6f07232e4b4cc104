#include "lodsplat/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace lodsplat {

void CameraView::validate() const {
  if (!(fx > 0 && fy > 0)) throw std::invalid_argument("camera " + id + ": focal lengths must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) {
    throw std::invalid_argument("camera " + id + ": principal point outside the image");
  }
}

CameraView look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double vertical_fov_rad,
                   int width, int height) {
  const Vec3 z = (target - eye).normalized();
  Vec3 world_up = up.normalized();
  if (std::abs(z.dot(world_up)) > 0.999) world_up = Vec3::UnitZ();
  const Vec3 x = z.cross(world_up).normalized();
  const Vec3 y = z.cross(x);
  CameraView cam;
  cam.width = width;
  cam.height = height;
  cam.fy = 0.5 * height / std::tan(0.5 * vertical_fov_rad);
  cam.fx = cam.fy;
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  cam.rotation.row(0) = x;
  cam.rotation.row(1) = y;
  cam.rotation.row(2) = z;
  cam.translation = -cam.rotation * eye;
  return cam;
}

PixelProjection project_vertex(const CameraView& cam, const Vec3& world) {
  const Vec3 t = cam.to_camera(world);
  const double u = cam.fx * t.x() + cam.cx * t.z();
  const double v = cam.fy * t.y() + cam.cy * t.z();
  const double w = t.z();
  PixelProjection p;
  p.depth = w;
  p.behind = w <= 0;
  if (!p.behind) p.pixel = Vec2(u / w, v / w);
  return p;
}

}  // namespace lodsplat
