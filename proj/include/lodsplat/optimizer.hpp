#pragma once

#include "lodsplat/driver.hpp"
#include "lodsplat/hierarchy.hpp"
#include "lodsplat/image.hpp"
#include "lodsplat/rasterizer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace lodsplat {

struct LearningRates {
  /// Multiplied by the rest mesh extent.
  double position = 1.6e-4;
  double rotation = 1e-3;
  double log_scale = 5e-3;
  double opacity = 5e-2;
  double sh_dc = 2.5e-3;
  double sh_rest = 1.25e-4;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-15;
};

struct TrainConfig {
  double l1_weight = 0.8;
  double dssim_weight = 0.2;
  int iterations = 3000;
  LearningRates lr;
  AdamConfig adam;
  std::uint64_t seed = 0;
  RenderConfig render;
  /// CSV log (iteration, loss, psnr) written when set.
  std::optional<std::filesystem::path> log_path;
  int log_interval = 100;
  /// Flattened (keyframe, camera) index of the PSNR probe view.
  std::size_t probe_view = 0;

  /// Throws std::invalid_argument for negative weights, weights that do not
  /// sum to 1, negative iterations or a non-positive log interval.
  void validate() const;
};

struct LossResult {
  double value = 0;
  double l1 = 0;
  double ssim = 0;
  /// d value / d rendered.
  Image grad;
};

/// l1_weight * mean|a - b| + dssim_weight * (1 - SSIM(a, b)) / 2 and its
/// gradient with respect to `rendered`. The L1 subgradient at a tie is 0.
LossResult loss(const Image& rendered, const Image& target, double l1_weight = 0.8,
                double dssim_weight = 0.2);

struct Moments {
  double m = 0;
  double v = 0;
};

/// One bias-corrected first/second-moment step; `step` counts from 1.
/// Throws std::domain_error for a non-finite gradient.
double adaptive_step(double param, double grad, Moments& moments, double lr, std::uint64_t step,
                     const AdamConfig& cfg = {});

struct StageStats {
  int level = 0;
  std::vector<double> losses;
  std::size_t trained_gaussians = 0;

  /// Mean loss over the first and last 10% of iterations (at least one).
  double head_mean() const;
  double tail_mean() const;
};

/// Trains every unfrozen Gaussian of `level`. Level-0 vertex splats keep
/// their position. Each iteration samples one (keyframe, camera) pair with a
/// seeded generator, poses the avatar on that keyframe, renders, and applies
/// one adaptive step to the embedded parameters. Afterwards every root at
/// `level` is marked optimized. Throws std::invalid_argument for an empty
/// dataset or views without targets, HierarchyError when no root is at
/// `level`.
StageStats train_stage(AvatarHierarchy& h, const TrainingSet& data, int level,
                       const TrainConfig& cfg);

/// Renders the avatar posed on `frame` from `view` and compares against the
/// view's target.
double view_psnr(const AvatarHierarchy& h, const TrainingFrame& frame, const CameraView& view,
                 const RenderConfig& cfg = {});

}  // namespace lodsplat
