#include "lodsplat/hierarchy.hpp"

#include "lodsplat/ply.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

namespace lodsplat {

using json = nlohmann::json;

namespace {

// Barycentric interpolation of vertex uvs at a point given in the root
// face's local frame. The point is projected onto the face plane and the
// weights are clamped to the triangle.
Vec2 uv_at(const AvatarHierarchy& h, std::uint32_t root, const Vec3& local) {
  const Mesh& m = h.mesh;
  if (m.uvs.empty()) return Vec2::Zero();
  const auto& corners = h.roots[root].anchors[0][0].corners;
  const Vec2 a = corners[0].head<2>(), b = corners[1].head<2>(), c = corners[2].head<2>();
  const Vec2 p = local.head<2>();
  const Vec2 v0 = b - a, v1 = c - a, v2 = p - a;
  const double den = v0.x() * v1.y() - v1.x() * v0.y();
  double wb = (v2.x() * v1.y() - v1.x() * v2.y()) / den;
  double wc = (v0.x() * v2.y() - v2.x() * v0.y()) / den;
  double wa = 1.0 - wb - wc;
  wa = std::max(wa, 0.0);
  wb = std::max(wb, 0.0);
  wc = std::max(wc, 0.0);
  const double sum = wa + wb + wc;
  const Face& f = m.faces[root];
  return (wa * m.uvs[f[0]] + wb * m.uvs[f[1]] + wc * m.uvs[f[2]]) / sum;
}

ShCoeffs texture_sh(const Mesh& m, const Vec2& uv) {
  ShCoeffs sh{};
  if (!m.texture) return sh;
  const Vec3 rgb = sample_bilinear(*m.texture, uv.x(), uv.y());
  for (int c = 0; c < 3; ++c) sh[c] = rgb_to_sh_dc(rgb[c]);
  return sh;
}

// Seeded splat: flat disc in the root plane, half the mean edge length
// across and a tenth of that along the normal. Level 0 starts at opacity
// 0.5. Finer levels start faint (0.1) so they add to the trained coarser
// render instead of covering it.
EmbeddedGaussian seed_gaussian(std::uint32_t root, const Vec3& local_position,
                               double mean_edge, int level, const ShCoeffs& sh) {
  EmbeddedGaussian g;
  g.face = root;
  g.local_position = local_position;
  g.local_rotation = identity_quat();
  const double s = std::max(0.5 * mean_edge, 1e-9);
  g.local_log_scale = Vec3(std::log(s), std::log(s), std::log(0.1 * s));
  g.sh = sh;
  g.opacity_logit = level == 0 ? 0.0 : std::log(0.1 / 0.9);
  g.level = level;
  return g;
}

double mean_edge(const std::array<Vec3, 3>& c) {
  return ((c[0] - c[1]).norm() + (c[1] - c[2]).norm() + (c[2] - c[0]).norm()) / 3.0;
}

std::uint32_t add_center(AvatarHierarchy& h, AnchorFace& anchor) {
  const Vec3 centroid = (anchor.corners[0] + anchor.corners[1] + anchor.corners[2]) / 3.0;
  const ShCoeffs sh = texture_sh(h.mesh, uv_at(h, anchor.root, centroid));
  const auto id = static_cast<std::uint32_t>(h.gaussians.size());
  h.gaussians.push_back(seed_gaussian(anchor.root, centroid, mean_edge(anchor.corners),
                                      anchor.level, sh));
  anchor.center_gaussian = id;
  return id;
}

std::vector<std::uint32_t> unique_sorted(std::span<const std::uint32_t> ids) {
  std::vector<std::uint32_t> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void check_root(const AvatarHierarchy& h, std::uint32_t f, bool require_optimized) {
  if (f >= h.roots.size()) {
    throw HierarchyError("root face " + std::to_string(f) + " out of range");
  }
  const RootFace& r = h.roots[f];
  if (!r.active()) {
    throw HierarchyError("root face " + std::to_string(f) + " is degenerate");
  }
  if (require_optimized && r.optimized_level < r.level) {
    throw HierarchyError("root face " + std::to_string(f) + " level " + std::to_string(r.level) +
                         " has not been optimized");
  }
}

void subdivide_unchecked(AvatarHierarchy& h, const std::vector<std::uint32_t>& roots) {
  for (std::uint32_t f : roots) {
    RootFace& root = h.roots[f];
    const int level = root.level;
    for (const auto& anchors : root.anchors) {
      for (const auto& a : anchors) h.gaussians[a.center_gaussian].frozen = true;
    }
    for (std::uint32_t v : h.mesh.faces[f]) {
      if (h.vertex_gaussians[v] != kNoGaussian) h.gaussians[h.vertex_gaussians[v]].frozen = true;
    }
    std::vector<AnchorFace> next;
    next.reserve(root.anchors[level].size() * 4);
    for (const AnchorFace& parent : root.anchors[level]) {
      const Vec3 p = h.gaussians[parent.center_gaussian].local_position;
      const auto& [a, b, c] = parent.corners;
      const std::array<std::array<Vec3, 3>, 4> shapes = {
          std::array<Vec3, 3>{a, b, c}, std::array<Vec3, 3>{a, b, p},
          std::array<Vec3, 3>{b, c, p}, std::array<Vec3, 3>{c, a, p}};
      for (const auto& corners : shapes) {
        AnchorFace child;
        child.root = f;
        child.corners = corners;
        child.level = level + 1;
        add_center(h, child);
        next.push_back(child);
      }
    }
    root.anchors.push_back(std::move(next));
    root.level = level + 1;
  }
}

}  // namespace

int AvatarHierarchy::current_level() const {
  int level = -1;
  for (const auto& r : roots) level = std::max(level, r.level);
  return level;
}

std::vector<int> AvatarHierarchy::face_levels() const {
  std::vector<int> levels(roots.size());
  std::transform(roots.begin(), roots.end(), levels.begin(), [](const RootFace& r) { return r.level; });
  return levels;
}

std::size_t AvatarHierarchy::anchored_vertex_count() const {
  return static_cast<std::size_t>(
      std::count_if(vertex_gaussians.begin(), vertex_gaussians.end(),
                    [](std::uint32_t id) { return id != kNoGaussian; }));
}

std::uint64_t AvatarHierarchy::expected_count() const {
  const auto levels = face_levels();
  return gaussian_count(anchored_vertex_count(), levels);
}

std::uint64_t gaussian_count(std::uint64_t vertex_count, std::span<const int> face_levels) {
  std::uint64_t n = vertex_count;
  for (int level : face_levels) {
    if (level < 0) continue;
    n += ((std::uint64_t{1} << (2 * (level + 1))) - 1) / 3;
  }
  return n;
}

std::uint64_t gaussian_count(std::uint64_t vertex_count, std::uint64_t face_count, int level) {
  if (level < 0) return vertex_count;
  return vertex_count + face_count * (((std::uint64_t{1} << (2 * (level + 1))) - 1) / 3);
}

AvatarHierarchy initialize_level0(const Mesh& mesh) {
  mesh.validate();
  AvatarHierarchy h;
  h.mesh = mesh;
  const std::size_t nf = mesh.face_count();
  h.rest_frames.resize(nf);
  h.roots.resize(nf);
  std::vector<bool> valid(nf, false);
  std::size_t skipped = 0;
  for (std::size_t f = 0; f < nf; ++f) {
    if (auto frame = try_face_frame(mesh.vertices, mesh.faces[f])) {
      h.rest_frames[f] = *frame;
      valid[f] = true;
    } else {
      ++skipped;
    }
  }
  if (skipped > 0) {
    std::cerr << "warning: skipping " << skipped << " degenerate face(s)\n";
  }

  // Root anchor faces first so uv lookups can use their corners.
  for (std::size_t f = 0; f < nf; ++f) {
    if (!valid[f]) continue;
    AnchorFace a;
    a.root = static_cast<std::uint32_t>(f);
    a.level = 0;
    for (int i = 0; i < 3; ++i) {
      a.corners[i] = h.rest_frames[f].to_local(mesh.vertices[mesh.faces[f][i]]);
    }
    h.roots[f].level = 0;
    h.roots[f].anchors.push_back({a});
  }

  // Vertex splats anchor to the first non-degenerate face that uses them.
  std::vector<std::uint32_t> anchor_face(mesh.vertex_count(), kNoGaussian);
  for (std::size_t f = 0; f < nf; ++f) {
    if (!valid[f]) continue;
    for (std::uint32_t v : mesh.faces[f]) {
      if (anchor_face[v] == kNoGaussian) anchor_face[v] = static_cast<std::uint32_t>(f);
    }
  }
  h.vertex_gaussians.assign(mesh.vertex_count(), kNoGaussian);
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    const std::uint32_t f = anchor_face[v];
    if (f == kNoGaussian) continue;
    const Vec3 local = h.rest_frames[f].to_local(mesh.vertices[v]);
    const ShCoeffs sh = mesh.uvs.empty() ? ShCoeffs{} : texture_sh(mesh, mesh.uvs[v]);
    EmbeddedGaussian g =
        seed_gaussian(f, local, mean_edge(h.roots[f].anchors[0][0].corners), 0, sh);
    g.position_frozen = true;
    h.vertex_gaussians[v] = static_cast<std::uint32_t>(h.gaussians.size());
    h.gaussians.push_back(g);
  }

  for (std::size_t f = 0; f < nf; ++f) {
    if (valid[f]) add_center(h, h.roots[f].anchors[0][0]);
  }
  return h;
}

void subdivide(AvatarHierarchy& h, std::span<const std::uint32_t> selected_roots) {
  const auto roots = unique_sorted(selected_roots);
  for (std::uint32_t f : roots) check_root(h, f, true);
  subdivide_unchecked(h, roots);
}

void mark_level_optimized(AvatarHierarchy& h, int level) {
  for (auto& r : h.roots) {
    if (r.active() && r.level == level) r.optimized_level = level;
  }
}

void enhance(AvatarHierarchy& h, std::span<const std::uint32_t> selected_roots, int target_level,
             const LevelRefiner& refine) {
  const auto roots = unique_sorted(selected_roots);
  for (std::uint32_t f : roots) {
    check_root(h, f, true);
    if (h.roots[f].level >= target_level) {
      throw HierarchyError("root face " + std::to_string(f) + " is already at level " +
                           std::to_string(h.roots[f].level));
    }
  }
  bool first = true;
  while (true) {
    std::vector<std::uint32_t> pending;
    for (std::uint32_t f : roots) {
      if (h.roots[f].level < target_level) pending.push_back(f);
    }
    if (pending.empty()) break;
    if (!first && refine) {
      // Train every level created in the previous pass before refining on top of it.
      std::set<int> levels;
      for (std::uint32_t f : pending) levels.insert(h.roots[f].level);
      for (int level : levels) {
        refine(h, level);
        mark_level_optimized(h, level);
      }
    }
    subdivide_unchecked(h, pending);
    first = false;
  }
}

std::vector<std::uint32_t> all_roots(const AvatarHierarchy& h) {
  std::vector<std::uint32_t> roots;
  for (std::size_t f = 0; f < h.roots.size(); ++f) {
    if (h.roots[f].active()) roots.push_back(static_cast<std::uint32_t>(f));
  }
  return roots;
}

std::vector<GaussianParams> embedded_params(const AvatarHierarchy& h) {
  std::vector<GaussianParams> out(h.gaussians.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& g = h.gaussians[i];
    out[i].position = g.local_position;
    out[i].rotation = g.local_rotation;
    out[i].log_scale = g.local_log_scale;
    out[i].sh = g.sh;
    out[i].opacity_logit = g.opacity_logit;
  }
  return out;
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const std::string& suffix) {
  return std::filesystem::path(prefix.string() + suffix);
}

std::string relative_to(const std::filesystem::path& target, const std::filesystem::path& dir) {
  std::error_code ec;
  auto rel = std::filesystem::relative(target, dir, ec);
  if (ec || rel.empty()) return std::filesystem::absolute(target).string();
  return rel.generic_string();
}

}  // namespace

void save_avatar(const std::filesystem::path& prefix, const AvatarHierarchy& h) {
  const auto json_path = with_suffix(prefix, ".json");
  const auto dir = std::filesystem::absolute(json_path).parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);

  std::string mesh_path = h.mesh.source_path;
  std::string texture_path = h.mesh.texture_path;
  if (mesh_path.empty()) {
    mesh_path = with_suffix(prefix, "_mesh.obj").string();
    save_obj(mesh_path, h.mesh);
  }
  if (texture_path.empty() && h.mesh.texture) {
    texture_path = with_suffix(prefix, "_texture.png").string();
    write_png(texture_path, *h.mesh.texture);
  }

  export_ply(with_suffix(prefix, ".ply"), embedded_params(h));

  json j;
  j["format"] = "lodsplat-hierarchy";
  j["version"] = 1;
  j["mesh"] = relative_to(mesh_path, dir);
  j["texture"] = texture_path.empty() ? "" : relative_to(texture_path, dir);
  j["vertex_count"] = h.mesh.vertex_count();
  j["face_count"] = h.mesh.face_count();
  j["gaussian_count"] = h.gaussians.size();
  std::vector<std::int64_t> vg(h.vertex_gaussians.size());
  std::transform(h.vertex_gaussians.begin(), h.vertex_gaussians.end(), vg.begin(),
                 [](std::uint32_t id) { return id == kNoGaussian ? -1 : std::int64_t{id}; });
  j["vertex_gaussians"] = vg;
  std::vector<std::uint32_t> face;
  std::vector<int> level, frozen, position_frozen;
  for (const auto& g : h.gaussians) {
    face.push_back(g.face);
    level.push_back(g.level);
    frozen.push_back(g.frozen ? 1 : 0);
    position_frozen.push_back(g.position_frozen ? 1 : 0);
  }
  j["gaussians"] = {{"face", face}, {"level", level}, {"frozen", frozen},
                    {"position_frozen", position_frozen}};
  json roots = json::array();
  for (std::size_t f = 0; f < h.roots.size(); ++f) {
    const RootFace& r = h.roots[f];
    json levels = json::array();
    for (const auto& anchors : r.anchors) {
      std::vector<std::uint32_t> centers;
      std::vector<double> corners;
      for (const auto& a : anchors) {
        centers.push_back(a.center_gaussian);
        for (const auto& c : a.corners) corners.insert(corners.end(), {c.x(), c.y(), c.z()});
      }
      levels.push_back({{"centers", centers}, {"corners", corners}});
    }
    roots.push_back({{"face", f},
                     {"level", r.level},
                     {"optimized_level", r.optimized_level},
                     {"anchors", levels}});
  }
  j["roots"] = std::move(roots);
  std::ofstream out(json_path);
  if (!out) throw IoError("cannot write " + json_path.string());
  out << j.dump() << '\n';
}

AvatarHierarchy load_avatar(const std::filesystem::path& prefix) {
  const auto json_path = with_suffix(prefix, ".json");
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open " + json_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "lodsplat-hierarchy") throw FormatError("not a hierarchy file");
    const auto dir = std::filesystem::absolute(json_path).parent_path();
    const std::string tex = j.at("texture").get<std::string>();
    std::optional<std::filesystem::path> tex_path;
    if (!tex.empty()) tex_path = dir / tex;
    AvatarHierarchy h;
    h.mesh = load_obj(dir / j.at("mesh").get<std::string>(), tex_path);
    if (h.mesh.vertex_count() != j.at("vertex_count").get<std::size_t>() ||
        h.mesh.face_count() != j.at("face_count").get<std::size_t>()) {
      throw FormatError("rest mesh does not match the hierarchy");
    }
    h.rest_frames.resize(h.mesh.face_count());
    for (std::size_t f = 0; f < h.mesh.face_count(); ++f) {
      if (auto frame = try_face_frame(h.mesh.vertices, h.mesh.faces[f])) h.rest_frames[f] = *frame;
    }
    const auto params = import_ply(with_suffix(prefix, ".ply"));
    const auto& jg = j.at("gaussians");
    const auto face = jg.at("face").get<std::vector<std::uint32_t>>();
    const auto level = jg.at("level").get<std::vector<int>>();
    const auto frozen = jg.at("frozen").get<std::vector<int>>();
    const auto position_frozen = jg.at("position_frozen").get<std::vector<int>>();
    if (params.size() != face.size() || face.size() != level.size() ||
        level.size() != frozen.size() || frozen.size() != position_frozen.size()) {
      throw FormatError("PLY and hierarchy disagree on the Gaussian count");
    }
    h.gaussians.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& g = h.gaussians[i];
      g.face = face[i];
      g.local_position = params[i].position;
      g.local_rotation = params[i].rotation;
      g.local_log_scale = params[i].log_scale;
      g.sh = params[i].sh;
      g.opacity_logit = params[i].opacity_logit;
      g.level = level[i];
      g.frozen = frozen[i] != 0;
      g.position_frozen = position_frozen[i] != 0;
    }
    for (auto id : j.at("vertex_gaussians").get<std::vector<std::int64_t>>()) {
      h.vertex_gaussians.push_back(id < 0 ? kNoGaussian : static_cast<std::uint32_t>(id));
    }
    const auto& jr = j.at("roots");
    if (jr.size() != h.mesh.face_count()) throw FormatError("root count mismatch");
    h.roots.resize(jr.size());
    for (std::size_t f = 0; f < jr.size(); ++f) {
      RootFace& r = h.roots[f];
      r.level = jr[f].at("level").get<int>();
      r.optimized_level = jr[f].at("optimized_level").get<int>();
      int l = 0;
      for (const auto& jl : jr[f].at("anchors")) {
        const auto centers = jl.at("centers").get<std::vector<std::uint32_t>>();
        const auto corners = jl.at("corners").get<std::vector<double>>();
        if (corners.size() != centers.size() * 9) throw FormatError("anchor corner count mismatch");
        std::vector<AnchorFace> anchors(centers.size());
        for (std::size_t a = 0; a < centers.size(); ++a) {
          anchors[a].root = static_cast<std::uint32_t>(f);
          anchors[a].level = l;
          anchors[a].center_gaussian = centers[a];
          for (int c = 0; c < 3; ++c) {
            anchors[a].corners[c] =
                Vec3(corners[a * 9 + c * 3], corners[a * 9 + c * 3 + 1], corners[a * 9 + c * 3 + 2]);
          }
        }
        r.anchors.push_back(std::move(anchors));
        ++l;
      }
    }
    if (h.expected_count() != h.gaussians.size()) {
      throw FormatError("hierarchy violates the Gaussian count identity");
    }
    return h;
  } catch (const json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
}

}  // namespace lodsplat
