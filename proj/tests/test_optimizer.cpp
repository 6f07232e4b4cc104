#include "lodsplat/optimizer.hpp"
#include "lodsplat/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace lodsplat;

namespace {

// Raw trainable values of one splat, for bitwise comparisons.
std::vector<double> raw(const EmbeddedGaussian& g) {
  std::vector<double> out(g.local_position.data(), g.local_position.data() + 3);
  out.insert(out.end(), g.local_rotation.data(), g.local_rotation.data() + 4);
  out.insert(out.end(), g.local_log_scale.data(), g.local_log_scale.data() + 3);
  out.insert(out.end(), g.sh.begin(), g.sh.end());
  out.push_back(g.opacity_logit);
  return out;
}

bool bitwise_equal(const EmbeddedGaussian& a, const EmbeddedGaussian& b) {
  const auto x = raw(a), y = raw(b);
  return std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
}

TrainingSet small_set(const Mesh& m, int cameras, int size, int keyframes = 1) {
  const Animation anim = make_wobble_animation(m, keyframes);
  const CameraRig rig = build_camera_rig(2.0, cameras, size, size);
  std::vector<std::size_t> idx(static_cast<std::size_t>(keyframes));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_training_set(m, anim, rig, idx);
}

TrainConfig quick(int iterations, std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("adaptive_step: zero gradient leaves the parameter unchanged") {
  Moments m;
  double p = 0.75;
  for (std::uint64_t t = 1; t <= 50; ++t) p = adaptive_step(p, 0.0, m, 0.1, t);
  CHECK(p == 0.75);
}

TEST_CASE("adaptive_step: constant gradient moves by lr per step") {
  const double lr = 1e-2;
  for (const double g : {3.0, -0.002}) {
    Moments m;
    double p = 0;
    double prev = p;
    for (std::uint64_t t = 1; t <= 200; ++t) {
      p = adaptive_step(p, g, m, lr, t);
      // Bias-corrected moments of a constant are the constant itself.
      CHECK((prev - p) == doctest::Approx(lr * (g > 0 ? 1 : -1)).epsilon(1e-9));
      prev = p;
    }
  }
}

TEST_CASE("adaptive_step matches a hand-written moment update") {
  test::Gen gen(31);
  const AdamConfig cfg;
  Moments m;
  double p = 0.3, om = 0, ov = 0, op = 0.3;
  for (std::uint64_t t = 1; t <= 300; ++t) {
    const double g = gen.uniform(-1, 1);
    p = adaptive_step(p, g, m, 5e-3, t, cfg);
    om = 0.9 * om + 0.1 * g;
    ov = 0.999 * ov + 0.001 * g * g;
    const double mhat = om / (1 - std::pow(0.9, static_cast<double>(t)));
    const double vhat = ov / (1 - std::pow(0.999, static_cast<double>(t)));
    op -= 5e-3 * mhat / (std::sqrt(vhat) + 1e-15);
    CHECK(p == doctest::Approx(op).epsilon(1e-12));
  }
}

TEST_CASE("adaptive_step is deterministic and rejects non-finite gradients") {
  auto run = [] {
    test::Gen gen(32);
    Moments m;
    double p = 0;
    std::vector<double> path;
    for (std::uint64_t t = 1; t <= 100; ++t) path.push_back(p = adaptive_step(p, gen.uniform(-1, 1), m, 1e-3, t));
    return path;
  };
  CHECK(run() == run());
  Moments m;
  CHECK_THROWS_AS(adaptive_step(0, std::nan(""), m, 1e-3, 1), std::domain_error);
  CHECK_THROWS_AS(adaptive_step(0, INFINITY, m, 1e-3, 1), std::domain_error);
}

TEST_CASE("TrainConfig validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.l1_weight = 0.7;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.iterations = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.log_interval = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.l1_weight = 1.2;
  cfg.dssim_weight = -0.2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("train_stage errors") {
  AvatarHierarchy h = initialize_level0(make_triangle());
  CHECK_THROWS_AS(train_stage(h, {}, 0, quick(1)), std::invalid_argument);
  const TrainingSet data = small_set(make_triangle(), 2, 16);
  CHECK_THROWS_AS(train_stage(h, data, 1, quick(1)), HierarchyError);
  TrainingSet no_target = data;
  no_target[0].views[0].target.reset();
  CHECK_THROWS_AS(train_stage(h, no_target, 0, quick(1)), std::invalid_argument);
}

TEST_CASE("zero iterations leave every splat unchanged") {
  const Mesh m = make_triangle();
  AvatarHierarchy h = initialize_level0(m);
  const auto before = h.gaussians;
  const auto stats = train_stage(h, small_set(m, 2, 16), 0, quick(0));
  CHECK(stats.losses.empty());
  REQUIRE(h.gaussians.size() == before.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(bitwise_equal(h.gaussians[i], before[i]));
}

TEST_CASE("stage 0 keeps vertex positions and trains everything else") {
  const Mesh m = make_quad();
  AvatarHierarchy h = initialize_level0(m);
  const auto before = h.gaussians;
  const auto stats = train_stage(h, small_set(m, 4, 24), 0, quick(30));
  CHECK(stats.trained_gaussians == 6);
  CHECK(h.gaussians.size() == before.size());
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    const auto id = h.vertex_gaussians[v];
    CHECK((h.gaussians[id].local_position - before[id].local_position).norm() == 0.0);
    CHECK(h.gaussians[id].opacity_logit != before[id].opacity_logit);
  }
  const auto center = h.roots[0].anchors[0][0].center_gaussian;
  CHECK((h.gaussians[center].local_position - before[center].local_position).norm() > 0.0);
  for (const auto& r : h.roots) CHECK(r.optimized_level == 0);
}

TEST_CASE("two-stage run on one triangle freezes level 0 bitwise") {
  const Mesh m = make_triangle();
  AvatarHierarchy h = initialize_level0(m);
  const TrainingSet data = small_set(m, 4, 24);
  train_stage(h, data, 0, quick(20));
  subdivide(h, all_roots(h));
  const auto before = h.gaussians;
  const auto stats = train_stage(h, data, 1, quick(20));
  CHECK(stats.trained_gaussians == 4);
  REQUIRE(h.gaussians.size() == before.size());
  bool level1_moved = false;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i].level < 1) {
      CHECK(bitwise_equal(h.gaussians[i], before[i]));
    } else {
      level1_moved = level1_moved || !bitwise_equal(h.gaussians[i], before[i]);
    }
  }
  CHECK(level1_moved);
}

TEST_CASE("fixed seed gives bit-identical avatars and logs") {
  const Mesh m = make_icosphere(0, 0.5);
  const TrainingSet data = small_set(m, 4, 24, 2);
  const auto dir = std::filesystem::temp_directory_path() / "lodsplat_test_optimizer";
  std::filesystem::create_directories(dir);
  auto run = [&](std::uint64_t seed, const std::string& log) {
    AvatarHierarchy h = initialize_level0(m);
    TrainConfig cfg = quick(40, seed);
    cfg.log_path = dir / log;
    cfg.log_interval = 10;
    train_stage(h, data, 0, cfg);
    return h;
  };
  const auto a = run(7, "a.csv"), b = run(7, "b.csv"), c = run(8, "c.csv");
  bool seeds_differ = false;
  for (std::size_t i = 0; i < a.gaussians.size(); ++i) {
    CHECK(bitwise_equal(a.gaussians[i], b.gaussians[i]));
    seeds_differ = seeds_differ || !bitwise_equal(a.gaussians[i], c.gaussians[i]);
  }
  CHECK(seeds_differ);
  const std::string log = slurp(dir / "a.csv");
  CHECK(log == slurp(dir / "b.csv"));
  CHECK(log.rfind("iteration,loss,psnr\n", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 5);
}

TEST_CASE("stage 0 on a textured quad fits a held-out view") {
  // 8 rig cameras for training, one frontal camera held out. Six splats
  // cannot draw the square's hard edges, so the measured ceiling sits near
  // 16 dB; the bar is set from that run.
  const Mesh m = make_quad(1.0, pattern_texture(64));
  const Animation anim = make_wobble_animation(m, 1);
  CameraRig rig = build_camera_rig(2.0, 9, 64, 64);
  rig.cameras.pop_back();
  const std::vector<std::size_t> idx{0};
  const TrainingSet data = make_training_set(m, anim, rig, idx);
  CameraRig held;
  held.cameras = {look_at(Vec3(0.4, 0.3, 1.9), Vec3::Zero(), -Vec3::UnitY(), kDefaultFov, 64, 64)};
  const TrainingSet probe = make_training_set(m, anim, held, idx);

  AvatarHierarchy h = initialize_level0(m);
  const double initial = view_psnr(h, probe[0], probe[0].views[0]);
  const auto stats = train_stage(h, data, 0, quick(500));
  const double trained = view_psnr(h, probe[0], probe[0].views[0]);
  MESSAGE("held-out PSNR " << initial << " -> " << trained << " dB");
  CHECK(trained >= 15.0);
  CHECK(trained >= initial + 2.0);
  CHECK(stats.tail_mean() < stats.head_mean());
}
