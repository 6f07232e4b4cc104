#pragma once

#include "lodsplat/driver.hpp"
#include "lodsplat/hierarchy.hpp"
#include "lodsplat/rasterizer.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lodsplat {

struct BenchAvatar {
  std::string id;
  const AvatarHierarchy* hierarchy = nullptr;
};

struct BenchOptions {
  int frames = 300;
  double radius = 2.0;
  int width = 1080;
  int height = 1080;
  double vertical_fov_rad = kDefaultFov;
  /// Re-pose every frame from `animation` (frame i uses keyframe i mod K).
  bool dynamic = false;
  /// Render every frame in both modes back to back, alternating which goes
  /// first, and report a static and a dynamic row per avatar. Both means
  /// then see the same machine conditions. `dynamic` is ignored.
  bool paired = false;
  const Animation* animation = nullptr;
  /// Copies of the avatar side by side along x.
  int multiplicity = 1;
  double spacing = 0.8;
  RenderConfig render;
  /// Writes frame####.png for every rendered frame when set.
  std::optional<std::filesystem::path> frame_dir;
};

struct BenchRow {
  std::string avatar;
  std::size_t gaussian_count = 0;
  bool dynamic = false;
  int multiplicity = 1;
  double mean_frame_ms = 0;
  int frames = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  void write_csv(const std::filesystem::path& path) const;
  void write_json(const std::filesystem::path& path) const;
};

/// 360 degree orbit in the horizontal plane at `radius`, looking at the
/// origin; frame i sits at angle 2 pi i / frames.
std::vector<CameraView> orbit_path(int frames, double radius, int width, int height,
                                   double vertical_fov_rad = kDefaultFov);

/// Renders the orbit once per avatar and reports wall-clock mean frame time.
/// Static mode poses the avatar once on its rest mesh before timing;
/// dynamic mode includes posing in every timed frame. Throws
/// std::invalid_argument for dynamic or paired mode without an animation,
/// a bad multiplicity or a non-positive frame count.
BenchReport bench(std::span<const BenchAvatar> avatars, const BenchOptions& options);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace lodsplat
