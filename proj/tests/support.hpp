#pragma once

#include "lodsplat/camera.hpp"
#include "lodsplat/gaussian.hpp"
#include "lodsplat/math.hpp"
#include "lodsplat/mesh.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace test {

using namespace lodsplat;

// Hand-rolled generators for property tests.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  Vec3 vec3(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }

  Vec3 unit() {
    while (true) {
      const Vec3 v = vec3(-1, 1);
      if (v.norm() > 0.1 && v.norm() <= 1) return v.normalized();
    }
  }

  Quat quat() {
    while (true) {
      const Quat q(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      if (q.norm() > 0.2) return q.normalized();
    }
  }

  Mat3 rotation() { return quat_to_matrix(quat()); }

  // Triangle with area well above the degenerate threshold.
  std::array<Vec3, 3> triangle(double extent = 1.0) {
    while (true) {
      std::array<Vec3, 3> t = {vec3(-extent, extent), vec3(-extent, extent), vec3(-extent, extent)};
      if (0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm() > 1e-3 * extent * extent) return t;
    }
  }

  GaussianParams gaussian() {
    GaussianParams g;
    g.position = vec3(-1, 1);
    g.rotation = quat() * uniform(0.5, 2.0);
    g.log_scale = vec3(-4, -1);
    for (double& c : g.sh) c = uniform(-0.5, 0.5);
    g.opacity_logit = uniform(-2, 2);
    return g;
  }
};

inline FaceFrame random_frame(Gen& g) {
  FaceFrame f;
  f.rotation = g.rotation();
  f.origin = g.vec3(-2, 2);
  return f;
}

// Rotation matrix from axis-angle via Rodrigues, independent of the
// quaternion code under test.
inline Mat3 rodrigues(const Vec3& axis, double angle) {
  const Vec3 k = axis.normalized();
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(angle) * kx + (1 - std::cos(angle)) * kx * kx;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline CameraView pinhole(double f, double cx, double cy, int w, int h) {
  CameraView c;
  c.fx = c.fy = f;
  c.cx = cx;
  c.cy = cy;
  c.width = w;
  c.height = h;
  return c;
}

}  // namespace test
