#pragma once

#include "lodsplat/driver.hpp"
#include "lodsplat/image.hpp"
#include "lodsplat/mesh.hpp"

#include <cstdint>
#include <memory>

namespace lodsplat {

// Procedural scenes for tests, demos and benchmarks.

/// Smooth multi-frequency color pattern, values within [0.1, 0.9].
std::shared_ptr<const Image> pattern_texture(int size = 256);
std::shared_ptr<const Image> solid_texture(const Vec3& rgb, int size = 4);

/// Subdivided icosahedron (12, 42, 162, 642, ... vertices). uvs are the
/// planar projection u = (1 + x / r) / 2, v = (1 + y / r) / 2, so the front
/// and back hemispheres share the texture without a seam.
Mesh make_icosphere(int subdivisions, double radius, std::shared_ptr<const Image> texture = nullptr);

/// Latitude-longitude sphere with two poles: 2 + rings * segments vertices
/// and 2 * rings * segments faces. rings = 82, segments = 84 gives 6890
/// vertices and 13776 faces.
Mesh make_uv_sphere(int rings, int segments, double radius,
                    std::shared_ptr<const Image> texture = nullptr);

/// Square of side `size` in the z = 0 plane centered at the origin, facing
/// +z, split along the diagonal from (-,-) to (+,+).
Mesh make_quad(double size = 1.0, std::shared_ptr<const Image> texture = nullptr);

/// Single triangle (0,0,0), (1,0,0), (0,1,0).
Mesh make_triangle(std::shared_ptr<const Image> texture = nullptr);

/// Keyframes that rotate the mesh about +y and apply a small radial wobble.
/// Frame 0 is the rest pose; timestamps are i / fps.
Animation make_wobble_animation(const Mesh& rest, int frames, double amplitude = 0.03,
                                double max_angle_rad = 0.5, double fps = 30.0);

}  // namespace lodsplat
