#pragma once

#include "lodsplat/image.hpp"
#include "lodsplat/math.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lodsplat {

using Face = std::array<std::uint32_t, 3>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Faces with area at or below this are degenerate (m^2).
inline constexpr double kDegenerateArea = 1e-12;

/// Shared-vertex triangle mesh. Faces wind counter-clockwise seen from the
/// outside; uvs are per vertex. The texture is shared between keyframes.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec2> uvs;
  std::shared_ptr<const Image> texture;
  std::string texture_path;
  /// OBJ the mesh was loaded from, if any.
  std::string source_path;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }

  /// Throws GeometryError when an index is out of range, a face repeats a
  /// vertex, or uvs do not match the vertex count.
  void validate() const;

  /// Same topology, texture and uvs; new vertex positions.
  Mesh with_vertices(std::vector<Vec3> positions) const;
};

/// Local frame of a triangle: origin at the centroid, z along the unit
/// normal, x toward the first vertex. Columns of `rotation` are the local
/// axes expressed in world coordinates.
struct FaceFrame {
  Vec3 origin = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();

  Vec3 to_world(const Vec3& local) const { return rotation * local + origin; }
  Vec3 to_local(const Vec3& world) const { return rotation.transpose() * (world - origin); }
};

double face_area(std::span<const Vec3> vertices, const Face& face);
double face_area(const Mesh& mesh, std::size_t face);

FaceFrame face_frame(std::span<const Vec3> vertices, const Face& face);
FaceFrame face_frame(const Mesh& mesh, std::size_t face);

/// face_frame without the degenerate-face error.
std::optional<FaceFrame> try_face_frame(std::span<const Vec3> vertices, const Face& face);

/// Isotropic area scale sqrt(posed_area / rest_area). Returns 0 for a
/// collapsed posed face; throws for a degenerate rest face.
double face_scale_factor(std::span<const Vec3> rest, std::span<const Vec3> posed,
                         const Face& face);
double face_scale_factor(const Mesh& rest, const Mesh& posed, std::size_t face);

/// Radius of the vertex bounding sphere about the bounding-box center.
double mesh_extent(const Mesh& mesh);

/// Wavefront OBJ with v / vt / f records. Polygons are fan-triangulated.
/// A vertex referenced with several vt indices keeps the first one.
/// The texture is taken from `texture_override` when given, otherwise from
/// the map_Kd of the first referenced material library.
Mesh load_obj(const std::filesystem::path& path,
              const std::optional<std::filesystem::path>& texture_override = std::nullopt);

/// Writes v, vt (one per vertex) and f v/vt records.
void save_obj(const std::filesystem::path& path, const Mesh& mesh);

/// Throws GeometryError unless both meshes have identical faces.
void require_same_topology(const Mesh& a, const Mesh& b);

}  // namespace lodsplat
