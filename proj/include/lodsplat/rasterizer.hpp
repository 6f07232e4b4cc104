#pragma once

#include "lodsplat/camera.hpp"
#include "lodsplat/gaussian.hpp"
#include "lodsplat/image.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace lodsplat {

struct RenderConfig {
  int tile_size = 16;
  /// Added to the screen-space covariance diagonal (px^2).
  double dilation = 0.3;
  double alpha_max = 0.99;
  /// Blending stops once transmittance falls below this.
  double min_transmittance = 1e-4;
  double near_plane = 0.01;
  /// Splats contribute only inside this Mahalanobis radius.
  double cutoff_sigma = 3.0;
  Vec3 background = Vec3::Ones();
};

/// exp(-1/2 (x - mean)^T cov^-1 (x - mean)) for 2D or 3D points.
/// Throws std::domain_error for a singular covariance.
double gaussian_density(const Vec2& x, const Vec2& mean, const Mat2& cov);
double gaussian_density(const Vec3& x, const Vec3& mean, const Mat3& cov);

/// Screen-space footprint of one splat.
struct Splat2D {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
  /// Inverse covariance entries (a, b, c) of [[a b] [b c]].
  Vec3 conic = Vec3::Zero();
  double depth = 0;
  Vec3 rgb = Vec3::Zero();
  /// Channels where the SH color was clamped at zero.
  std::array<bool, 3> rgb_clamped{};
  double opacity = 0;
  /// Bounding radius of the cutoff ellipse in pixels.
  int radius = 0;
  Vec3 cam_position = Vec3::Zero();
};

/// Projects one splat: camera-space mean, J W Sigma W^T J^T + dilation,
/// SH color for the view direction expressed in the splat's rotation frame
/// (R^T (mean - camera center), normalized). Returns nullopt when the splat is
/// behind the near plane or its cutoff ellipse misses the viewport.
std::optional<Splat2D> project_gaussian(const GaussianParams& g, const CameraView& cam,
                                        const RenderConfig& cfg = {});

/// Intermediate results of a forward pass, kept for the backward pass.
struct ForwardState {
  Image image;
  CameraView camera;  // without target
  RenderConfig config;
  std::vector<std::optional<Splat2D>> splats;  // by Gaussian id
  /// Visible ids sorted front to back; ties broken by id.
  std::vector<std::uint32_t> order;
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<std::uint32_t>> tile_lists;
  std::vector<double> final_transmittance;  // per pixel
  /// Per pixel: one past the last list entry that was blended.
  std::vector<std::uint32_t> contributors;
};

/// Raw-parameter gradients of one splat.
struct GaussianGradient {
  Vec3 position = Vec3::Zero();
  Quat rotation = Quat::Zero();
  Vec3 log_scale = Vec3::Zero();
  double opacity_logit = 0;
  ShCoeffs sh{};
};

using GradientBuffer = std::vector<GaussianGradient>;

/// Tiled forward pass, parallel over tiles.
ForwardState render_forward(std::span<const GaussianParams> gaussians, const CameraView& cam,
                            const RenderConfig& cfg = {});
Image render(std::span<const GaussianParams> gaussians, const CameraView& cam,
             const RenderConfig& cfg = {});

/// Backward pass for dL/dimage = `loss_grad`. Gaussians flagged in `frozen`
/// (same length as the scene, or empty for none) get zero gradients.
/// Per-tile partial sums are merged in tile order so the result is
/// independent of the thread count.
GradientBuffer render_backward(const ForwardState& state, std::span<const GaussianParams> gaussians,
                               const Image& loss_grad, std::span<const std::uint8_t> frozen = {});

GradientBuffer render_with_gradients(std::span<const GaussianParams> gaussians,
                                     const CameraView& cam, const RenderConfig& cfg,
                                     const Image& loss_grad,
                                     std::span<const std::uint8_t> frozen = {});

// Serial per-pixel implementations over the global depth order, no tiling.
// Kept as the reference the tiled kernels are tested against.
Image render_reference(std::span<const GaussianParams> gaussians, const CameraView& cam,
                       const RenderConfig& cfg = {});
GradientBuffer render_with_gradients_reference(std::span<const GaussianParams> gaussians,
                                               const CameraView& cam, const RenderConfig& cfg,
                                               const Image& loss_grad,
                                               std::span<const std::uint8_t> frozen = {});

}  // namespace lodsplat
