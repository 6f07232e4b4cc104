#include "lodsplat/synthetic.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace lodsplat {

std::shared_ptr<const Image> pattern_texture(int size) {
  auto img = std::make_shared<Image>(size, size);
  constexpr double tau = 2.0 * std::numbers::pi;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size, v = (y + 0.5) / size;
      const Vec3 rgb(0.5 + 0.3 * std::sin(tau * 2 * u) + 0.1 * std::cos(tau * 5 * v),
                     0.5 + 0.3 * std::cos(tau * 3 * v) + 0.1 * std::sin(tau * 4 * (u + v)),
                     0.5 + 0.25 * std::sin(tau * (u - 2 * v)) + 0.15 * std::cos(tau * 6 * u));
      img->set_rgb(x, y, rgb);
    }
  }
  return img;
}

std::shared_ptr<const Image> solid_texture(const Vec3& rgb, int size) {
  auto img = std::make_shared<Image>(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) img->set_rgb(x, y, rgb);
  }
  return img;
}

Mesh make_icosphere(int subdivisions, double radius, std::shared_ptr<const Image> texture) {
  if (subdivisions < 0) throw std::invalid_argument("subdivisions must be non-negative");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : m.vertices) v.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const auto id = static_cast<std::uint32_t>(m.vertices.size());
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      mid.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(m.faces.size() * 4);
    for (const Face& f : m.faces) {
      const auto ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  for (auto& v : m.vertices) {
    m.uvs.emplace_back(0.5 * (1 + v.x()), 0.5 * (1 + v.y()));
    v *= radius;
  }
  m.texture = texture ? std::move(texture) : pattern_texture();
  return m;
}

Mesh make_uv_sphere(int rings, int segments, double radius, std::shared_ptr<const Image> texture) {
  if (rings < 1 || segments < 3) throw std::invalid_argument("uv sphere needs rings >= 1, segments >= 3");
  Mesh m;
  auto add = [&](const Vec3& unit) {
    m.vertices.push_back(radius * unit);
    m.uvs.emplace_back(0.5 * (1 + unit.x()), 0.5 * (1 + unit.y()));
  };
  add(Vec3(0, 1, 0));
  for (int r = 0; r < rings; ++r) {
    const double theta = std::numbers::pi * (r + 1) / (rings + 1);
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / segments;
      add(Vec3(std::sin(theta) * std::cos(phi), std::cos(theta), std::sin(theta) * std::sin(phi)));
    }
  }
  add(Vec3(0, -1, 0));
  const auto ring = [&](int r, int s) {
    return static_cast<std::uint32_t>(1 + r * segments + (s % segments));
  };
  const auto south = static_cast<std::uint32_t>(m.vertices.size() - 1);
  for (int s = 0; s < segments; ++s) m.faces.push_back({0, ring(0, s + 1), ring(0, s)});
  for (int r = 0; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      m.faces.push_back({ring(r, s), ring(r, s + 1), ring(r + 1, s)});
      m.faces.push_back({ring(r, s + 1), ring(r + 1, s + 1), ring(r + 1, s)});
    }
  }
  for (int s = 0; s < segments; ++s) m.faces.push_back({south, ring(rings - 1, s), ring(rings - 1, s + 1)});
  m.texture = texture ? std::move(texture) : pattern_texture();
  return m;
}

Mesh make_quad(double size, std::shared_ptr<const Image> texture) {
  const double h = 0.5 * size;
  Mesh m;
  m.vertices = {{-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}};
  m.uvs = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  m.texture = texture ? std::move(texture) : pattern_texture();
  return m;
}

Mesh make_triangle(std::shared_ptr<const Image> texture) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.uvs = {{0, 0}, {1, 0}, {0, 1}};
  m.faces = {{0, 1, 2}};
  m.texture = texture ? std::move(texture) : pattern_texture();
  return m;
}

Animation make_wobble_animation(const Mesh& rest, int frames, double amplitude,
                                double max_angle_rad, double fps) {
  if (frames <= 0) throw std::invalid_argument("animation needs at least one frame");
  Animation anim;
  for (int i = 0; i < frames; ++i) {
    const double phase = frames > 1 ? static_cast<double>(i) / (frames - 1) : 0.0;
    const double angle = max_angle_rad * std::sin(std::numbers::pi * phase);
    const Mat3 rot = Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
    std::vector<Vec3> v(rest.vertices.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      const Vec3& p = rest.vertices[k];
      const double bump = 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * phase) *
                                    std::sin(3.0 * p.y() + 2.0 * p.x());
      v[k] = rot * (bump * p);
    }
    anim.keyframes.push_back(std::move(v));
    anim.timestamps.push_back(i / fps);
  }
  return anim;
}

}  // namespace lodsplat
