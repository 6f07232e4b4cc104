#include "lodsplat/driver.hpp"

#include "lodsplat/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>

namespace lodsplat {

using json = nlohmann::json;

void Animation::validate(std::size_t vertex_count) const {
  if (timestamps.size() != keyframes.size()) {
    throw GeometryError("animation has " + std::to_string(keyframes.size()) + " keyframes but " +
                        std::to_string(timestamps.size()) + " timestamps");
  }
  for (std::size_t i = 0; i < keyframes.size(); ++i) {
    if (keyframes[i].size() != vertex_count) {
      throw GeometryError("keyframe " + std::to_string(i) + " has " +
                          std::to_string(keyframes[i].size()) + " vertices, expected " +
                          std::to_string(vertex_count));
    }
    if (i > 0 && !(timestamps[i] > timestamps[i - 1])) {
      throw GeometryError("keyframe timestamps must be strictly increasing");
    }
  }
}

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string keyframe_file(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame%04zu.obj", index);
  return buf;
}

std::vector<Vec3> load_keyframe(const std::filesystem::path& path, const Mesh& rest) {
  Mesh m = load_obj(path, std::nullopt);
  require_same_topology(rest, m);
  if (m.vertex_count() != rest.vertex_count()) {
    throw GeometryError(path.string() + ": vertex count differs from the rest mesh");
  }
  return std::move(m.vertices);
}

std::string camera_id(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cam%02zu", j);
  return buf;
}

std::vector<Vec3> icosphere_directions() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                         {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                         {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  const std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  std::map<std::pair<int, int>, int> midpoints;
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) {
      const int a = std::min(f[e], f[(e + 1) % 3]), b = std::max(f[e], f[(e + 1) % 3]);
      if (midpoints.emplace(std::pair{a, b}, static_cast<int>(v.size())).second) {
        v.push_back(0.5 * (v[a] + v[b]));
      }
    }
  }
  for (auto& p : v) p.normalize();
  return v;
}

std::vector<Vec3> spiral_directions(int count) {
  std::vector<Vec3> v;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    v.emplace_back(r * std::cos(golden * i), y, r * std::sin(golden * i));
  }
  return v;
}

}  // namespace

Animation load_animation(const std::filesystem::path& dir, const Mesh& rest) {
  const json j = read_json(dir / "manifest.json");
  Animation anim;
  try {
    for (const auto& k : j.at("keyframes")) {
      anim.keyframes.push_back(load_keyframe(dir / k.at("file").get<std::string>(), rest));
      anim.timestamps.push_back(k.at("timestamp").get<double>());
    }
  } catch (const json::exception& e) {
    throw IoError((dir / "manifest.json").string() + ": " + e.what());
  }
  anim.validate(rest.vertex_count());
  return anim;
}

void save_animation(const std::filesystem::path& dir, const Mesh& rest, const Animation& anim) {
  anim.validate(rest.vertex_count());
  std::filesystem::create_directories(dir);
  json frames = json::array();
  for (std::size_t i = 0; i < anim.size(); ++i) {
    const std::string file = keyframe_file(i);
    save_obj(dir / file, rest.with_vertices(anim.keyframes[i]));
    frames.push_back({{"index", i}, {"file", file}, {"timestamp", anim.timestamps[i]}});
  }
  write_json(dir / "manifest.json", {{"keyframes", frames}});
}

CameraRig build_camera_rig(double radius, int count, int width, int height,
                           double vertical_fov_rad) {
  if (count <= 0) throw std::invalid_argument("camera count must be positive");
  if (!(radius > 0)) throw std::invalid_argument("rig radius must be positive");
  const auto dirs = count == 42 ? icosphere_directions() : spiral_directions(count);
  CameraRig rig;
  rig.radius = radius;
  for (std::size_t j = 0; j < dirs.size(); ++j) {
    CameraView cam = look_at(radius * dirs[j], Vec3::Zero(), Vec3::UnitY(), vertical_fov_rad,
                             width, height);
    cam.id = camera_id(j);
    rig.cameras.push_back(std::move(cam));
  }
  return rig;
}

PoseFrames pose_frames(const AvatarHierarchy& h, std::span<const Vec3> keyframe) {
  if (keyframe.size() != h.mesh.vertex_count()) {
    throw GeometryError("keyframe has " + std::to_string(keyframe.size()) +
                        " vertices, rest mesh has " + std::to_string(h.mesh.vertex_count()));
  }
  const std::size_t nf = h.mesh.face_count();
  PoseFrames pose;
  pose.frames.resize(nf);
  pose.scales.assign(nf, 0.0);
  for (std::size_t f = 0; f < nf; ++f) {
    if (!h.roots[f].active()) continue;
    const Face& face = h.mesh.faces[f];
    if (auto frame = try_face_frame(keyframe, face)) {
      pose.frames[f] = *frame;
      pose.scales[f] = face_scale_factor(h.mesh.vertices, keyframe, face);
    } else {
      pose.frames[f].rotation = h.rest_frames[f].rotation;
      pose.frames[f].origin = (keyframe[face[0]] + keyframe[face[1]] + keyframe[face[2]]) / 3.0;
    }
  }
  return pose;
}

std::vector<GaussianParams> pose_avatar(const AvatarHierarchy& h, const PoseFrames& pose) {
  std::vector<GaussianParams> out(h.gaussians.size());
  const auto n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static) num_threads(worker_threads())
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& g = h.gaussians[i];
    out[i] = to_world(g, pose.frames[g.face], pose.scales[g.face]);
  }
  return out;
}

std::vector<GaussianParams> pose_avatar(const AvatarHierarchy& h, std::span<const Vec3> keyframe) {
  return pose_avatar(h, pose_frames(h, keyframe));
}

std::vector<GaussianParams> pose_avatar(const AvatarHierarchy& h, const Mesh& keyframe) {
  require_same_topology(h.mesh, keyframe);
  return pose_avatar(h, std::span<const Vec3>(keyframe.vertices));
}

namespace {

// One point-sampled pass with the sample grid shifted by `offset` pixels.
// Covered samples write their texel into `out`; `hit` marks them.
void rasterize_pass(const Mesh& mesh, const CameraView& cam, const Vec2& offset, Image& out,
                    std::vector<std::uint8_t>& hit) {
  constexpr double kNear = 0.01;
  std::vector<double> zbuf(out.pixel_count(), std::numeric_limits<double>::infinity());
  std::fill(hit.begin(), hit.end(), 0);
  for (const Face& f : mesh.faces) {
    std::array<Vec3, 3> t;
    std::array<Vec2, 3> p;
    bool clipped = false;
    for (int i = 0; i < 3; ++i) {
      t[i] = cam.to_camera(mesh.vertices[f[i]]);
      if (t[i].z() <= kNear) clipped = true;
      p[i] = Vec2(cam.fx * t[i].x() / t[i].z() + cam.cx, cam.fy * t[i].y() / t[i].z() + cam.cy) - offset;
    }
    if (clipped) continue;
    const double area = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
    if (std::abs(area) < 1e-12) continue;
    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({p[0].x(), p[1].x(), p[2].x()}))));
    const int x1 = std::min(cam.width - 1,
                            static_cast<int>(std::floor(std::max({p[0].x(), p[1].x(), p[2].x()}))));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({p[0].y(), p[1].y(), p[2].y()}))));
    const int y1 = std::min(cam.height - 1,
                            static_cast<int>(std::floor(std::max({p[0].y(), p[1].y(), p[2].y()}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 q(x, y);
        std::array<double, 3> l;
        for (int i = 0; i < 3; ++i) {
          const Vec2& a = p[(i + 1) % 3];
          const Vec2& b = p[(i + 2) % 3];
          l[i] = ((b - a).x() * (q - a).y() - (b - a).y() * (q - a).x()) / area;
        }
        if (l[0] < 0 || l[1] < 0 || l[2] < 0) continue;
        double inv_depth = 0;
        Vec2 uv = Vec2::Zero();
        for (int i = 0; i < 3; ++i) {
          const double w = l[i] / t[i].z();
          inv_depth += w;
          uv += w * mesh.uvs[f[i]];
        }
        const double depth = 1.0 / inv_depth;
        const std::size_t idx = static_cast<std::size_t>(y) * cam.width + x;
        if (!(depth < zbuf[idx])) continue;
        zbuf[idx] = depth;
        hit[idx] = 1;
        uv *= depth;
        out.set_rgb(x, y, sample_bilinear(*mesh.texture, uv.x(), uv.y()));
      }
    }
  }
}

}  // namespace

Image render_mesh(const Mesh& mesh, const CameraView& cam, int samples_per_axis) {
  if (samples_per_axis < 1) throw std::invalid_argument("samples_per_axis must be positive");
  Image img(cam.width, cam.height, 1.0);
  if (mesh.faces.empty()) return img;
  if (!mesh.texture || mesh.uvs.size() != mesh.vertices.size()) {
    throw GeometryError("render_mesh needs a texture and per-vertex uvs");
  }
  if (samples_per_axis == 1) {
    std::vector<std::uint8_t> hit(img.pixel_count());
    rasterize_pass(mesh, cam, Vec2::Zero(), img, hit);
    return img;
  }
  // Box filter over an n x n grid of sample positions inside each pixel.
  const int n = samples_per_axis;
  Image sum(cam.width, cam.height, 0.0), pass(cam.width, cam.height, 1.0);
  std::vector<std::uint8_t> hit(img.pixel_count());
  for (int sy = 0; sy < n; ++sy) {
    for (int sx = 0; sx < n; ++sx) {
      const Vec2 offset((sx + 0.5) / n - 0.5, (sy + 0.5) / n - 0.5);
      rasterize_pass(mesh, cam, offset, pass, hit);
      for (std::size_t i = 0; i < hit.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
          sum.data()[i * 3 + c] += hit[i] ? pass.data()[i * 3 + c] : 1.0;
        }
      }
    }
  }
  for (double& v : sum.data()) v /= n * n;
  return sum;
}

std::string image_name(std::size_t keyframe, std::size_t camera) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "frame%04zu_cam%02zu.png", keyframe, camera);
  return buf;
}

void save_cameras(const std::filesystem::path& path, std::span<const CameraView> cameras) {
  if (cameras.empty()) throw std::invalid_argument("no cameras to save");
  const CameraView& c0 = cameras.front();
  json list = json::array();
  for (const auto& c : cameras) {
    if (c.fx != c0.fx || c.fy != c0.fy || c.cx != c0.cx || c.cy != c0.cy ||
        c.width != c0.width || c.height != c0.height) {
      throw std::invalid_argument("cameras.json requires shared intrinsics");
    }
    std::vector<double> r(9), t(3);
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) r[i * 3 + k] = c.rotation(i, k);
      t[i] = c.translation[i];
    }
    list.push_back({{"id", c.id}, {"rotation", r}, {"translation", t}});
  }
  write_json(path, {{"image_size", {c0.width, c0.height}},
                    {"fx", c0.fx},
                    {"fy", c0.fy},
                    {"cx", c0.cx},
                    {"cy", c0.cy},
                    {"cameras", list}});
}

std::vector<CameraView> load_cameras(const std::filesystem::path& path) {
  const json j = read_json(path);
  std::vector<CameraView> out;
  try {
    const auto size = j.at("image_size").get<std::vector<int>>();
    if (size.size() != 2) throw IoError(path.string() + ": image_size needs two entries");
    for (const auto& jc : j.at("cameras")) {
      CameraView c;
      c.id = jc.at("id").get<std::string>();
      c.width = size[0];
      c.height = size[1];
      c.fx = j.at("fx").get<double>();
      c.fy = j.at("fy").get<double>();
      c.cx = j.at("cx").get<double>();
      c.cy = j.at("cy").get<double>();
      const auto r = jc.at("rotation").get<std::vector<double>>();
      const auto t = jc.at("translation").get<std::vector<double>>();
      if (r.size() != 9 || t.size() != 3) {
        throw IoError(path.string() + ": camera " + c.id + " needs 9 rotation and 3 translation values");
      }
      for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) c.rotation(i, k) = r[i * 3 + k];
        c.translation[i] = t[i];
      }
      c.validate();
      out.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return out;
}

namespace {

void check_indices(const Animation& anim, std::span<const std::size_t> indices) {
  for (std::size_t i : indices) {
    if (i >= anim.size()) {
      throw std::out_of_range("keyframe index " + std::to_string(i) + " out of range (" +
                              std::to_string(anim.size()) + " keyframes)");
    }
  }
}

// Runs fn(pair) over every (keyframe slot, camera) pair in parallel and
// rethrows the first failure.
template <typename Fn>
void for_each_view(std::size_t keyframes, std::size_t cameras, Fn&& fn) {
  const auto total = static_cast<std::int64_t>(keyframes * cameras);
  std::exception_ptr error;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_threads())
  for (std::int64_t p = 0; p < total; ++p) {
    try {
      fn(static_cast<std::size_t>(p) / cameras, static_cast<std::size_t>(p) % cameras);
    } catch (...) {
      std::lock_guard lock(mu);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

void generate_dataset(const std::filesystem::path& out, const Mesh& rest, const Animation& anim,
                      const CameraRig& rig, std::span<const std::size_t> keyframe_indices) {
  anim.validate(rest.vertex_count());
  check_indices(anim, keyframe_indices);
  std::filesystem::create_directories(out / "keyframes");
  save_cameras(out / "cameras.json", rig.cameras);

  json frames = json::array();
  std::vector<Mesh> posed;
  for (std::size_t i : keyframe_indices) {
    const std::string file = "keyframes/" + keyframe_file(i);
    posed.push_back(rest.with_vertices(anim.keyframes[i]));
    save_obj(out / file, posed.back());
    frames.push_back({{"index", i}, {"file", file}, {"timestamp", anim.timestamps[i]}});
  }
  write_json(out / "manifest.json", {{"keyframes", frames},
                                     {"cameras", "cameras.json"},
                                     {"images", "frame{index:04}_cam{camera:02}.png"}});

  for_each_view(keyframe_indices.size(), rig.cameras.size(), [&](std::size_t k, std::size_t j) {
    write_png(out / image_name(keyframe_indices[k], j), render_mesh(posed[k], rig.cameras[j]));
  });
}

TrainingSet load_training_set(const std::filesystem::path& dir, const Mesh& rest) {
  const json j = read_json(dir / "manifest.json");
  const auto cameras = load_cameras(dir / "cameras.json");
  TrainingSet set;
  try {
    for (const auto& k : j.at("keyframes")) {
      TrainingFrame frame;
      frame.index = k.at("index").get<std::size_t>();
      frame.vertices = load_keyframe(dir / k.at("file").get<std::string>(), rest);
      frame.views = cameras;
      set.push_back(std::move(frame));
    }
  } catch (const json::exception& e) {
    throw IoError((dir / "manifest.json").string() + ": " + e.what());
  }
  for_each_view(set.size(), cameras.size(), [&](std::size_t k, std::size_t c) {
    CameraView& view = set[k].views[c];
    Image target = read_png(dir / image_name(set[k].index, c));
    if (target.width() != view.width || target.height() != view.height) {
      throw IoError(image_name(set[k].index, c) + ": size does not match cameras.json");
    }
    view.target = std::move(target);
  });
  return set;
}

TrainingSet make_training_set(const Mesh& rest, const Animation& anim, const CameraRig& rig,
                              std::span<const std::size_t> keyframe_indices) {
  anim.validate(rest.vertex_count());
  check_indices(anim, keyframe_indices);
  TrainingSet set(keyframe_indices.size());
  std::vector<Mesh> posed;
  for (std::size_t k = 0; k < keyframe_indices.size(); ++k) {
    set[k].index = keyframe_indices[k];
    set[k].vertices = anim.keyframes[keyframe_indices[k]];
    set[k].views = rig.cameras;
    posed.push_back(rest.with_vertices(set[k].vertices));
  }
  for_each_view(set.size(), rig.cameras.size(), [&](std::size_t k, std::size_t j) {
    set[k].views[j].target = quantize_8bit(render_mesh(posed[k], rig.cameras[j]));
  });
  return set;
}

}  // namespace lodsplat
