#pragma once

#include "lodsplat/math.hpp"
#include "lodsplat/mesh.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>

namespace lodsplat {

inline constexpr int kShBasisCount = 16;  // degree 3
inline constexpr int kShCoeffCount = 3 * kShBasisCount;

/// sh[3 * basis + channel]; basis 0 is the DC term.
using ShCoeffs = std::array<double, kShCoeffCount>;

inline constexpr double kShC0 = 0.28209479177387814;

/// DC coefficient that reproduces `color` under the +0.5 offset convention.
inline double rgb_to_sh_dc(double color) { return (color - 0.5) / kShC0; }

/// World-space splat in raw (optimizer-facing) storage: log-scale, logit
/// opacity, unnormalized quaternion.
struct GaussianParams {
  Vec3 position = Vec3::Zero();
  Quat rotation = identity_quat();
  Vec3 log_scale = Vec3::Zero();
  ShCoeffs sh{};
  double opacity_logit = 0.0;

  Vec3 scale() const { return log_scale.array().exp(); }
  double opacity() const { return sigmoid(opacity_logit); }
  Quat unit_rotation() const { return normalized_quat(rotation); }
};

/// A splat expressed in the local frame of an anchor face of the rest mesh.
struct EmbeddedGaussian {
  std::uint32_t face = 0;
  Vec3 local_position = Vec3::Zero();
  Quat local_rotation = identity_quat();
  Vec3 local_log_scale = Vec3::Zero();
  ShCoeffs sh{};
  double opacity_logit = 0.0;
  int level = 0;
  bool frozen = false;
  /// Position held fixed while the rest of the splat trains (mesh-vertex
  /// splats at level 0).
  bool position_frozen = false;
};

/// R S S^T R^T for the normalized quaternion and the activated scale.
Mat3 covariance(const Quat& rotation, const Vec3& scale);
Mat3 covariance(const GaussianParams& g);

/// Local -> world: X = k R X_l + T, r = q(R) r_l, s = k s_l. Color and
/// opacity carry over unchanged.
GaussianParams to_world(const EmbeddedGaussian& g, const FaceFrame& frame, double k);

/// World -> local, the inverse of to_world. Only the parameter fields of the
/// result are set; face, level and flags are left at their defaults.
EmbeddedGaussian embed(const GaussianParams& g, const FaceFrame& frame, double k);

/// Real SH basis values (degree 3) for a unit direction.
std::array<double, kShBasisCount> sh_basis(const Vec3& dir);

/// d basis / d dir with dir components treated as independent variables.
std::array<Vec3, kShBasisCount> sh_basis_gradient(const Vec3& dir);

/// max(0, sum_k sh_k Y_k(dir) + 0.5) per channel.
Vec3 eval_sh(const ShCoeffs& sh, const Vec3& dir);

}  // namespace lodsplat
