#include "lodsplat/gaussian.hpp"

#include <cmath>

namespace lodsplat {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                          0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

}  // namespace

Mat3 covariance(const Quat& rotation, const Vec3& scale) {
  const Mat3 m = quat_to_matrix(normalized_quat(rotation)) * scale.asDiagonal();
  const Mat3 c = m * m.transpose();
  return 0.5 * (c + c.transpose());
}

Mat3 covariance(const GaussianParams& g) { return covariance(g.rotation, g.scale()); }

GaussianParams to_world(const EmbeddedGaussian& g, const FaceFrame& frame, double k) {
  GaussianParams w;
  w.position = k * (frame.rotation * g.local_position) + frame.origin;
  w.rotation = quat_mul(matrix_to_quat(frame.rotation), g.local_rotation);
  w.log_scale = g.local_log_scale.array() + std::log(k);
  w.sh = g.sh;
  w.opacity_logit = g.opacity_logit;
  return w;
}

EmbeddedGaussian embed(const GaussianParams& g, const FaceFrame& frame, double k) {
  if (!(k > 0)) throw std::invalid_argument("embed: scale factor must be positive");
  EmbeddedGaussian e;
  e.local_position = frame.rotation.transpose() * (g.position - frame.origin) / k;
  e.local_rotation = quat_mul(quat_conj(matrix_to_quat(frame.rotation)), g.rotation);
  e.local_log_scale = g.log_scale.array() - std::log(k);
  e.sh = g.sh;
  e.opacity_logit = g.opacity_logit;
  return e;
}

std::array<double, kShBasisCount> sh_basis(const Vec3& d) {
  const double x = d.x(), y = d.y(), z = d.z();
  const double xx = x * x, yy = y * y, zz = z * z;
  return {kShC0,
          -kC1 * y,
          kC1 * z,
          -kC1 * x,
          kC2[0] * x * y,
          kC2[1] * y * z,
          kC2[2] * (2 * zz - xx - yy),
          kC2[3] * x * z,
          kC2[4] * (xx - yy),
          kC3[0] * y * (3 * xx - yy),
          kC3[1] * x * y * z,
          kC3[2] * y * (4 * zz - xx - yy),
          kC3[3] * z * (2 * zz - 3 * xx - 3 * yy),
          kC3[4] * x * (4 * zz - xx - yy),
          kC3[5] * z * (xx - yy),
          kC3[6] * x * (xx - 3 * yy)};
}

std::array<Vec3, kShBasisCount> sh_basis_gradient(const Vec3& d) {
  const double x = d.x(), y = d.y(), z = d.z();
  const double xx = x * x, yy = y * y, zz = z * z;
  return {Vec3(0, 0, 0),
          Vec3(0, -kC1, 0),
          Vec3(0, 0, kC1),
          Vec3(-kC1, 0, 0),
          Vec3(kC2[0] * y, kC2[0] * x, 0),
          Vec3(0, kC2[1] * z, kC2[1] * y),
          Vec3(-2 * kC2[2] * x, -2 * kC2[2] * y, 4 * kC2[2] * z),
          Vec3(kC2[3] * z, 0, kC2[3] * x),
          Vec3(2 * kC2[4] * x, -2 * kC2[4] * y, 0),
          Vec3(6 * kC3[0] * x * y, kC3[0] * (3 * xx - 3 * yy), 0),
          Vec3(kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y),
          Vec3(-2 * kC3[2] * x * y, kC3[2] * (4 * zz - xx - 3 * yy), 8 * kC3[2] * y * z),
          Vec3(-6 * kC3[3] * x * z, -6 * kC3[3] * y * z, kC3[3] * (6 * zz - 3 * xx - 3 * yy)),
          Vec3(kC3[4] * (4 * zz - 3 * xx - yy), -2 * kC3[4] * x * y, 8 * kC3[4] * x * z),
          Vec3(2 * kC3[5] * x * z, -2 * kC3[5] * y * z, kC3[5] * (xx - yy)),
          Vec3(kC3[6] * (3 * xx - 3 * yy), -6 * kC3[6] * x * y, 0)};
}

Vec3 eval_sh(const ShCoeffs& sh, const Vec3& dir) {
  const auto basis = sh_basis(dir);
  Vec3 rgb = Vec3::Constant(0.5);
  for (int k = 0; k < kShBasisCount; ++k) {
    for (int c = 0; c < 3; ++c) rgb[c] += basis[k] * sh[3 * k + c];
  }
  return rgb.cwiseMax(0.0);
}

}  // namespace lodsplat
