#include "lodsplat/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

namespace lodsplat {

void Mesh::validate() const {
  const auto nv = vertices.size();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& t = faces[f];
    for (auto i : t) {
      if (i >= nv) {
        throw GeometryError("face " + std::to_string(f) + " references vertex " +
                            std::to_string(i) + " of " + std::to_string(nv));
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw GeometryError("face " + std::to_string(f) + " repeats a vertex index");
    }
  }
  if (!uvs.empty() && uvs.size() != nv) {
    throw GeometryError("uv count " + std::to_string(uvs.size()) + " != vertex count " +
                        std::to_string(nv));
  }
}

Mesh Mesh::with_vertices(std::vector<Vec3> positions) const {
  if (positions.size() != vertices.size()) {
    throw GeometryError("keyframe has " + std::to_string(positions.size()) +
                        " vertices, rest mesh has " + std::to_string(vertices.size()));
  }
  Mesh m = *this;
  m.vertices = std::move(positions);
  return m;
}

double face_area(std::span<const Vec3> v, const Face& f) {
  return 0.5 * (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]).norm();
}

double face_area(const Mesh& mesh, std::size_t face) {
  return face_area(mesh.vertices, mesh.faces.at(face));
}

std::optional<FaceFrame> try_face_frame(std::span<const Vec3> v, const Face& f) {
  const Vec3& a = v[f[0]];
  const Vec3& b = v[f[1]];
  const Vec3& c = v[f[2]];
  const Vec3 n = (b - a).cross(c - a);
  if (0.5 * n.norm() <= kDegenerateArea) return std::nullopt;
  FaceFrame frame;
  frame.origin = (a + b + c) / 3.0;
  const Vec3 z = n.normalized();
  // The centroid-to-vertex direction lies in the plane, so x is already
  // orthogonal to z up to rounding; re-orthogonalize anyway.
  Vec3 x = a - frame.origin;
  x = (x - x.dot(z) * z).normalized();
  const Vec3 y = z.cross(x);
  frame.rotation.col(0) = x;
  frame.rotation.col(1) = y;
  frame.rotation.col(2) = z;
  return frame;
}

FaceFrame face_frame(std::span<const Vec3> v, const Face& f) {
  auto frame = try_face_frame(v, f);
  if (!frame) throw GeometryError("degenerate triangle");
  return *frame;
}

FaceFrame face_frame(const Mesh& mesh, std::size_t face) {
  return face_frame(mesh.vertices, mesh.faces.at(face));
}

double face_scale_factor(std::span<const Vec3> rest, std::span<const Vec3> posed,
                         const Face& f) {
  const double rest_area = face_area(rest, f);
  if (rest_area <= kDegenerateArea) throw GeometryError("degenerate rest face");
  const double posed_area = face_area(posed, f);
  if (posed_area <= kDegenerateArea) return 0.0;
  return std::sqrt(posed_area / rest_area);
}

double face_scale_factor(const Mesh& rest, const Mesh& posed, std::size_t face) {
  return face_scale_factor(rest.vertices, posed.vertices, rest.faces.at(face));
}

double mesh_extent(const Mesh& mesh) {
  if (mesh.vertices.empty()) return 1.0;
  Vec3 lo = mesh.vertices.front(), hi = lo;
  for (const Vec3& p : mesh.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 center = 0.5 * (lo + hi);
  double r = 0;
  for (const Vec3& p : mesh.vertices) r = std::max(r, (p - center).norm());
  return r > 0 ? r : 1.0;
}

void require_same_topology(const Mesh& a, const Mesh& b) {
  if (a.vertices.size() != b.vertices.size() || a.faces != b.faces) {
    throw GeometryError("keyframe topology differs from the rest mesh");
  }
}

namespace {

// Parses "v", "v/vt", "v//vn" or "v/vt/vn"; indices may be negative.
void parse_corner(const std::string& token, std::size_t nv, std::size_t nvt, long& vi,
                  long& ti) {
  const auto slash = token.find('/');
  auto resolve = [](long idx, std::size_t n) -> long {
    return idx < 0 ? static_cast<long>(n) + idx : idx - 1;
  };
  vi = resolve(std::stol(token.substr(0, slash)), nv);
  ti = -1;
  if (slash != std::string::npos) {
    const auto rest = token.substr(slash + 1);
    const auto slash2 = rest.find('/');
    const auto vt = rest.substr(0, slash2);
    if (!vt.empty()) ti = resolve(std::stol(vt), nvt);
  }
}

std::optional<std::filesystem::path> find_map_kd(const std::filesystem::path& mtl) {
  std::ifstream in(mtl);
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "map_Kd") {
      std::string name;
      std::getline(ls >> std::ws, name);
      while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
      return mtl.parent_path() / name;
    }
  }
  return std::nullopt;
}

}  // namespace

Mesh load_obj(const std::filesystem::path& path,
              const std::optional<std::filesystem::path>& texture_override) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Mesh mesh;
  std::vector<Vec2> texcoords;
  std::vector<long> vertex_uv;
  std::optional<std::filesystem::path> mtllib;
  bool uv_conflict = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad vertex");
      }
      mesh.vertices.push_back(p);
    } else if (key == "vt") {
      Vec2 t;
      if (!(ls >> t.x() >> t.y())) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad texcoord");
      }
      texcoords.push_back(t);
    } else if (key == "f") {
      std::vector<long> vs;
      std::string tok;
      vertex_uv.resize(mesh.vertices.size(), -1);
      while (ls >> tok) {
        long vi = 0, ti = 0;
        try {
          parse_corner(tok, mesh.vertices.size(), texcoords.size(), vi, ti);
        } catch (const std::exception&) {
          throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad face record");
        }
        if (vi < 0 || vi >= static_cast<long>(mesh.vertices.size()) ||
            ti >= static_cast<long>(texcoords.size())) {
          throw IoError(path.string() + ":" + std::to_string(lineno) +
                        ": face index out of range");
        }
        if (ti >= 0) {
          if (vertex_uv[vi] < 0) {
            vertex_uv[vi] = ti;
          } else if (vertex_uv[vi] != ti && texcoords[vertex_uv[vi]] != texcoords[ti]) {
            uv_conflict = true;
          }
        }
        vs.push_back(vi);
      }
      if (vs.size() < 3) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": face with < 3 corners");
      }
      for (std::size_t k = 1; k + 1 < vs.size(); ++k) {
        mesh.faces.push_back({static_cast<std::uint32_t>(vs[0]),
                              static_cast<std::uint32_t>(vs[k]),
                              static_cast<std::uint32_t>(vs[k + 1])});
      }
    } else if (key == "mtllib" && !mtllib) {
      std::string name;
      std::getline(ls >> std::ws, name);
      while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
      mtllib = path.parent_path() / name;
    }
  }
  if (uv_conflict) {
    std::cerr << "warning: " << path.string()
              << ": vertices with several texture coordinates keep the first one\n";
  }
  if (!texcoords.empty()) {
    vertex_uv.resize(mesh.vertices.size(), -1);
    mesh.uvs.resize(mesh.vertices.size(), Vec2::Zero());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      if (vertex_uv[i] >= 0) mesh.uvs[i] = texcoords[vertex_uv[i]];
    }
  }
  std::optional<std::filesystem::path> tex = texture_override;
  if (!tex && mtllib) tex = find_map_kd(*mtllib);
  if (tex) {
    mesh.texture = std::make_shared<const Image>(read_png(*tex));
    mesh.texture_path = std::filesystem::absolute(*tex).string();
  }
  mesh.source_path = std::filesystem::absolute(path).string();
  mesh.validate();
  return mesh;
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const Vec3& p : mesh.vertices) out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const Vec2& t : mesh.uvs) out << "vt " << t.x() << ' ' << t.y() << '\n';
  const bool has_uv = !mesh.uvs.empty();
  for (const Face& f : mesh.faces) {
    out << 'f';
    for (auto i : f) {
      out << ' ' << i + 1;
      if (has_uv) out << '/' << i + 1;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace lodsplat
