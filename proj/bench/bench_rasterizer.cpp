// Tiled OpenMP kernels against the serial per-pixel reference.
// Thread count follows LODSPLAT_THREADS.
#include "lodsplat/driver.hpp"
#include "lodsplat/hierarchy.hpp"
#include "lodsplat/rasterizer.hpp"
#include "lodsplat/synthetic.hpp"

#include <benchmark/benchmark.h>

using namespace lodsplat;

namespace {

struct Scene {
  std::vector<GaussianParams> splats;
  CameraView camera;
  Image loss_grad;
};

// Icosphere avatar at the given level, seen from 2 m.
const Scene& scene(int level) {
  static std::vector<Scene> cache(4);
  Scene& s = cache.at(level);
  if (s.splats.empty()) {
    AvatarHierarchy h = initialize_level0(make_icosphere(2, 0.7, pattern_texture(64)));
    for (int l = 0; l < level; ++l) {
      mark_level_optimized(h, l);
      subdivide(h, all_roots(h));
    }
    s.splats = embedded_params(h);
    s.camera = look_at(Vec3(0.3, 0.4, 1.9), Vec3::Zero(), -Vec3::UnitY(), kDefaultFov, 256, 256);
    s.loss_grad = Image(256, 256, 1e-3);
  }
  return s;
}

void BM_render(benchmark::State& state) {
  const Scene& s = scene(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render(s.splats, s.camera));
  state.counters["splats"] = static_cast<double>(s.splats.size());
}

void BM_render_reference(benchmark::State& state) {
  const Scene& s = scene(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_reference(s.splats, s.camera));
  state.counters["splats"] = static_cast<double>(s.splats.size());
}

void BM_gradients(benchmark::State& state) {
  const Scene& s = scene(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_with_gradients(s.splats, s.camera, {}, s.loss_grad));
}

void BM_gradients_reference(benchmark::State& state) {
  const Scene& s = scene(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_with_gradients_reference(s.splats, s.camera, {}, s.loss_grad));
  }
}

}  // namespace

BENCHMARK(BM_render)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_reference)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gradients)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gradients_reference)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
