#include "lodsplat/driver.hpp"
#include "lodsplat/image.hpp"
#include "lodsplat/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

using namespace lodsplat;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "lodsplat_test_driver" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Quaternions q and -q are the same rotation.
double quat_distance(const Quat& a, const Quat& b) {
  const Quat na = normalized_quat(a), nb = normalized_quat(b);
  return std::min((na - nb).norm(), (na + nb).norm());
}

Mesh two_triangles() {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {3, 0, 0}, {4, 0, 0}, {3, 1, 0}};
  m.uvs = {{0, 0}, {1, 0}, {0, 1}, {0, 0}, {1, 0}, {0, 1}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  m.texture = solid_texture(Vec3(0.5, 0.5, 0.5));
  return m;
}

CameraView front(int size) {
  return look_at(Vec3(0, 0, 2), Vec3::Zero(), -Vec3::UnitY(), kDefaultFov, size, size);
}

}  // namespace

TEST_CASE("default rig: 42 cameras on a 2 m sphere looking at the origin") {
  const CameraRig rig = build_camera_rig();
  REQUIRE(rig.cameras.size() == 42);
  CHECK(rig.radius == 2.0);
  double min_angle = std::numbers::pi;
  for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
    const CameraView& c = rig.cameras[i];
    CHECK(c.width == 1080);
    CHECK(c.height == 1080);
    CHECK(c.fx == rig.cameras[0].fx);
    CHECK(c.cy == rig.cameras[0].cy);
    CHECK(std::abs(c.center().norm() - 2.0) <= 1e-9);
    const auto p = project_vertex(c, Vec3::Zero());
    CHECK_FALSE(p.behind);
    CHECK(std::abs(p.pixel.x() - c.cx) < 1e-9);
    CHECK(std::abs(p.pixel.y() - c.cy) < 1e-9);
    for (std::size_t j = 0; j < i; ++j) {
      const Vec3 a = c.center().normalized(), b = rig.cameras[j].center().normalized();
      min_angle = std::min(min_angle, std::acos(std::clamp(a.dot(b), -1.0, 1.0)));
    }
  }
  CHECK(min_angle > 0.3);
  CHECK(rig.cameras[7].id == "cam07");
  // 60 degree vertical field of view.
  CHECK(rig.cameras[0].fy == doctest::Approx(540.0 / std::tan(std::numbers::pi / 6)));
}

TEST_CASE("spiral rig for other counts") {
  const CameraRig rig = build_camera_rig(1.5, 9, 32, 24);
  REQUIRE(rig.cameras.size() == 9);
  for (const auto& c : rig.cameras) {
    CHECK(std::abs(c.center().norm() - 1.5) <= 1e-9);
    const auto p = project_vertex(c, Vec3::Zero());
    CHECK(std::abs(p.pixel.x() - c.cx) < 1e-9);
    CHECK(std::abs(p.pixel.y() - c.cy) < 1e-9);
  }
}

TEST_CASE("pose_avatar on the rest mesh reproduces the initialization") {
  const Mesh m = make_icosphere(2, 0.6);
  const AvatarHierarchy h = initialize_level0(m);
  const auto world = pose_avatar(h, m);
  REQUIRE(world.size() == h.gaussians.size());
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    CHECK((world[h.vertex_gaussians[v]].position - m.vertices[v]).norm() <= 1e-9);
  }
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    const auto& face = m.faces[f];
    const Vec3 centroid = (m.vertices[face[0]] + m.vertices[face[1]] + m.vertices[face[2]]) / 3.0;
    const auto id = h.roots[f].anchors[0][0].center_gaussian;
    CHECK((world[id].position - centroid).norm() <= 1e-9);
  }
}

TEST_CASE("property: pose_avatar is equivariant under rigid motions") {
  test::Gen gen(21);
  const Mesh m = make_icosphere(1, 0.5);
  AvatarHierarchy h = initialize_level0(m);
  for (auto& g : h.gaussians) {
    g.local_position += gen.vec3(-0.01, 0.01);
    g.local_rotation = gen.quat();
  }
  const auto base = pose_avatar(h, m);
  for (int trial = 0; trial < 20; ++trial) {
    const Quat q = gen.quat();
    const Mat3 r = test::rodrigues(Vec3(q[1], q[2], q[3]), 2 * std::acos(std::clamp(q[0], -1.0, 1.0)));
    const Vec3 t = gen.vec3(-1, 1);
    std::vector<Vec3> moved;
    for (const auto& v : m.vertices) moved.push_back(r * v + t);
    const auto world = pose_avatar(h, std::span<const Vec3>(moved));
    for (std::size_t i = 0; i < world.size(); ++i) {
      CHECK((world[i].position - (r * base[i].position + t)).norm() < 1e-9);
      CHECK(quat_distance(world[i].rotation, quat_mul(q, base[i].rotation)) < 1e-9);
      CHECK((world[i].log_scale - base[i].log_scale).norm() < 1e-9);
    }
  }
}

TEST_CASE("scaling one face by 2 doubles its splat scales") {
  const Mesh m = two_triangles();
  const AvatarHierarchy h = initialize_level0(m);
  std::vector<Vec3> kf = m.vertices;
  const Vec3 c = (kf[3] + kf[4] + kf[5]) / 3.0;
  for (int i = 3; i < 6; ++i) kf[i] = c + 2.0 * (kf[i] - c);
  const auto rest = pose_avatar(h, m);
  const auto posed = pose_avatar(h, std::span<const Vec3>(kf));
  for (std::size_t i = 0; i < h.gaussians.size(); ++i) {
    const double expected = h.gaussians[i].face == 1 ? 2.0 : 1.0;
    const Vec3 ratio = posed[i].scale().cwiseQuotient(rest[i].scale());
    CHECK((ratio - Vec3::Constant(expected)).norm() < 1e-12);
    // exp(log s + log k) by hand
    const Vec3 by_hand = (h.gaussians[i].local_log_scale.array() + std::log(expected)).exp();
    CHECK((posed[i].scale() - by_hand).norm() < 1e-12);
  }
}

TEST_CASE("a collapsed face keeps its rest orientation with zero scale") {
  const Mesh m = two_triangles();
  const AvatarHierarchy h = initialize_level0(m);
  std::vector<Vec3> kf = m.vertices;
  kf[5] = Vec3(3.5, 0, 0);  // face 1 becomes a segment
  const PoseFrames pose = pose_frames(h, kf);
  CHECK(pose.scales[1] == 0.0);
  CHECK((pose.frames[1].rotation - h.rest_frames[1].rotation).norm() == 0.0);
  CHECK((pose.frames[1].origin - (kf[3] + kf[4] + kf[5]) / 3.0).norm() < 1e-12);
  CHECK(pose.scales[0] == doctest::Approx(1.0));
}

TEST_CASE("pose_avatar rejects a topology mismatch") {
  const Mesh m = make_quad();
  const AvatarHierarchy h = initialize_level0(m);
  std::vector<Vec3> kf = m.vertices;
  kf.pop_back();
  CHECK_THROWS_AS(pose_avatar(h, std::span<const Vec3>(kf)), GeometryError);
}

TEST_CASE("render_mesh: empty mesh is white") {
  Mesh empty;
  const Image img = render_mesh(empty, front(16));
  for (double v : img.data()) CHECK(v == 1.0);
}

TEST_CASE("render_mesh: full-screen quad with a red texture") {
  const Mesh quad = make_quad(10.0, solid_texture(Vec3(1, 0, 0)));
  const Image img = render_mesh(quad, front(24));
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) CHECK((img.rgb(x, y) - Vec3(1, 0, 0)).norm() < 1e-12);
  }
}

TEST_CASE("render_mesh: the nearer of two overlapping quads wins") {
  // One mesh holding a large far quad and a small near one. The texture has
  // a green texel for the near quad and a blue one for the far quad.
  auto tex = std::make_shared<Image>(2, 1);
  tex->set_rgb(0, 0, Vec3(0, 1, 0));
  tex->set_rgb(1, 0, Vec3(0, 0, 1));
  Mesh near_quad = make_quad(0.5);
  for (auto& v : near_quad.vertices) v.z() += 0.5;
  const Mesh far_quad = make_quad(1.0);
  const CameraView cam = front(32);
  for (const bool near_first : {true, false}) {
    Mesh scene;
    scene.texture = tex;
    for (const bool near : {near_first, !near_first}) {
      const Mesh& part = near ? near_quad : far_quad;
      const auto offset = static_cast<std::uint32_t>(scene.vertices.size());
      for (const auto& v : part.vertices) {
        scene.vertices.push_back(v);
        scene.uvs.push_back(Vec2(near ? 0.25 : 0.75, 0.5));
      }
      for (const Face& f : part.faces) scene.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
    }
    const Image img = render_mesh(scene, cam);
    CHECK((img.rgb(16, 16) - Vec3(0, 1, 0)).norm() < 1e-9);
    const auto p = project_vertex(cam, Vec3(0.4, 0.4, 0));
    const int x = static_cast<int>(std::lround(p.pixel.x())), y = static_cast<int>(std::lround(p.pixel.y()));
    CHECK((img.rgb(x, y) - Vec3(0, 0, 1)).norm() < 1e-9);
  }
}

TEST_CASE("render_mesh: edge pixels average the covered samples") {
  // Red quad spanning u <= 4 exactly: pixel 4 straddles the edge.
  Mesh quad = make_quad(1.0, solid_texture(Vec3(1, 0, 0)));
  for (auto& v : quad.vertices) v = Vec3(-0.3 + 1.4 * v.x(), 2 * v.y(), 1);
  const CameraView cam = test::pinhole(10, 0, 0, 8, 8);
  for (const int n : {2, 4}) {
    const Image img = render_mesh(quad, cam, n);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 4; ++x) CHECK(img.rgb(x, y) == Vec3(1, 0, 0));
      CHECK((img.rgb(4, y) - Vec3(1, 0.5, 0.5)).norm() < 1e-12);
      for (int x = 5; x < 8; ++x) CHECK(img.rgb(x, y) == Vec3(1, 1, 1));
    }
  }
  const Image point = render_mesh(quad, cam, 1);
  CHECK(point.rgb(3, 0) == Vec3(1, 0, 0));
  CHECK(point.rgb(5, 0) == Vec3(1, 1, 1));
  CHECK_THROWS_AS(render_mesh(quad, cam, 0), std::invalid_argument);
}

TEST_CASE("render_mesh needs a texture") {
  Mesh quad = make_quad();
  quad.texture.reset();
  CHECK_THROWS_AS(render_mesh(quad, front(8)), GeometryError);
}

TEST_CASE("animation save and load round trip") {
  const Mesh m = make_icosphere(1, 0.5);
  const Animation anim = make_wobble_animation(m, 4);
  REQUIRE(anim.size() == 4);
  CHECK(anim.timestamps[1] == doctest::Approx(1.0 / 30));
  for (std::size_t v = 0; v < m.vertex_count(); ++v) CHECK((anim.keyframes[0][v] - m.vertices[v]).norm() < 1e-12);
  const auto dir = scratch("anim");
  save_animation(dir, m, anim);
  const Animation back = load_animation(dir, m);
  REQUIRE(back.size() == anim.size());
  for (std::size_t k = 0; k < anim.size(); ++k) {
    CHECK(back.timestamps[k] == doctest::Approx(anim.timestamps[k]));
    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
      CHECK((back.keyframes[k][v] - anim.keyframes[k][v]).norm() < 1e-6);
    }
  }
}

TEST_CASE("animation validation") {
  const Mesh m = make_triangle();
  Animation a;
  a.keyframes = {m.vertices, m.vertices};
  a.timestamps = {0.0, 0.0};
  CHECK_THROWS_AS(a.validate(3), GeometryError);
  a.timestamps = {0.0, 0.1};
  CHECK_NOTHROW(a.validate(3));
  CHECK_THROWS_AS(a.validate(4), GeometryError);
  a.timestamps = {0.0};
  CHECK_THROWS_AS(a.validate(3), GeometryError);
}

TEST_CASE("image names") {
  CHECK(image_name(0, 0) == "frame0000_cam00.png");
  CHECK(image_name(39, 41) == "frame0039_cam41.png");
}

TEST_CASE("cameras.json round trip") {
  const CameraRig rig = build_camera_rig(2.0, 42, 64, 48);
  const auto dir = scratch("cams");
  save_cameras(dir / "cameras.json", rig.cameras);
  const auto back = load_cameras(dir / "cameras.json");
  REQUIRE(back.size() == rig.cameras.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == rig.cameras[i].id);
    CHECK(back[i].width == 64);
    CHECK(back[i].height == 48);
    CHECK((back[i].rotation - rig.cameras[i].rotation).norm() < 1e-12);
    CHECK((back[i].translation - rig.cameras[i].translation).norm() < 1e-12);
    CHECK(back[i].fx == doctest::Approx(rig.cameras[i].fx));
  }
}

TEST_CASE("dataset: 40 keyframes x 42 cameras gives 1680 images") {
  const Mesh m = make_icosphere(0, 0.5);
  const Animation anim = make_wobble_animation(m, 40);
  const CameraRig rig = build_camera_rig(2.0, 42, 4, 4);
  std::vector<std::size_t> all(40);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto dir = scratch("full");
  generate_dataset(dir, m, anim, rig, all);
  std::size_t pngs = 0;
  for (const auto& e : fs::directory_iterator(dir)) pngs += e.path().extension() == ".png";
  CHECK(pngs == 1680);
  CHECK(fs::exists(dir / "frame0039_cam41.png"));
  CHECK(fs::exists(dir / "cameras.json"));
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("dataset: one view, byte-identical reruns, loadable") {
  const Mesh m = make_icosphere(1, 0.5);
  const Animation anim = make_wobble_animation(m, 3);
  CameraRig rig = build_camera_rig(2.0, 42, 24, 24);
  rig.cameras.resize(1);
  const std::vector<std::size_t> pick{2};
  const auto a = scratch("one_a"), b = scratch("one_b");
  generate_dataset(a, m, anim, rig, pick);
  generate_dataset(b, m, anim, rig, pick);
  std::size_t pngs = 0;
  for (const auto& e : fs::directory_iterator(a)) pngs += e.path().extension() == ".png";
  CHECK(pngs == 1);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    CHECK(slurp(e.path()) == slurp(b / fs::relative(e.path(), a)));
  }

  const TrainingSet set = load_training_set(a, m);
  REQUIRE(set.size() == 1);
  CHECK(set[0].index == 2);
  REQUIRE(set[0].views.size() == 1);
  REQUIRE(set[0].views[0].target);
  const TrainingSet mem = make_training_set(m, anim, rig, pick);
  CHECK(test::max_abs_diff(*set[0].views[0].target, *mem[0].views[0].target) < 1e-12);
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    CHECK((set[0].vertices[v] - anim.keyframes[2][v]).norm() < 1e-6);
  }
}

TEST_CASE("dataset rejects bad keyframe indices") {
  const Mesh m = make_triangle();
  const Animation anim = make_wobble_animation(m, 2);
  const CameraRig rig = build_camera_rig(2.0, 2, 4, 4);
  const std::vector<std::size_t> bad{5};
  CHECK_THROWS(generate_dataset(scratch("bad"), m, anim, rig, bad));
}
