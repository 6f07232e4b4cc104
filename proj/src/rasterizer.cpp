#include "lodsplat/rasterizer.hpp"

#include "lodsplat/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace lodsplat {

double gaussian_density(const Vec2& x, const Vec2& mean, const Mat2& cov) {
  const double det = cov.determinant();
  if (!(std::abs(det) > 1e-300)) throw std::domain_error("singular covariance");
  const Vec2 d = x - mean;
  return std::exp(-0.5 * d.dot(cov.inverse() * d));
}

double gaussian_density(const Vec3& x, const Vec3& mean, const Mat3& cov) {
  const double det = cov.determinant();
  if (!(std::abs(det) > 1e-300)) throw std::domain_error("singular covariance");
  const Vec3 d = x - mean;
  return std::exp(-0.5 * d.dot(cov.inverse() * d));
}

std::optional<Splat2D> project_gaussian(const GaussianParams& g, const CameraView& cam,
                                        const RenderConfig& cfg) {
  const Vec3 t = cam.to_camera(g.position);
  if (!(t.z() > cfg.near_plane)) return std::nullopt;
  const double inv_z = 1.0 / t.z();
  Eigen::Matrix<double, 2, 3> jac;
  jac << cam.fx * inv_z, 0, -cam.fx * t.x() * inv_z * inv_z,
         0, cam.fy * inv_z, -cam.fy * t.y() * inv_z * inv_z;
  const Eigen::Matrix<double, 2, 3> tw = jac * cam.rotation;
  Mat2 cov2 = tw * covariance(g) * tw.transpose();
  cov2(0, 0) += cfg.dilation;
  cov2(1, 1) += cfg.dilation;
  cov2(0, 1) = cov2(1, 0) = 0.5 * (cov2(0, 1) + cov2(1, 0));
  const double det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(0, 1);
  if (!(det > 0)) return std::nullopt;

  Splat2D s;
  s.mean = Vec2(cam.fx * t.x() * inv_z + cam.cx, cam.fy * t.y() * inv_z + cam.cy);
  s.cov = cov2;
  s.conic = Vec3(cov2(1, 1) / det, -cov2(0, 1) / det, cov2(0, 0) / det);
  s.depth = t.z();
  s.cam_position = t;

  const double mid = 0.5 * (cov2(0, 0) + cov2(1, 1));
  const double lambda = mid + std::sqrt(std::max(0.1, mid * mid - det));
  s.radius = static_cast<int>(std::ceil(cfg.cutoff_sigma * std::sqrt(lambda)));
  if (s.mean.x() + s.radius < 0 || s.mean.x() - s.radius > cam.width - 1 ||
      s.mean.y() + s.radius < 0 || s.mean.y() - s.radius > cam.height - 1) {
    return std::nullopt;
  }

  // View direction in the splat's own frame, so color rides along with
  // the splat when the mesh moves.
  const Vec3 dir = quat_to_matrix(g.unit_rotation()).transpose() * (g.position - cam.center()).normalized();
  const auto basis = sh_basis(dir);
  for (int c = 0; c < 3; ++c) {
    double v = 0.5;
    for (int k = 0; k < kShBasisCount; ++k) v += basis[k] * g.sh[3 * k + c];
    s.rgb_clamped[c] = v < 0;
    s.rgb[c] = std::max(v, 0.0);
  }
  s.opacity = g.opacity();
  return s;
}

namespace {

// Per-pixel evaluation shared by every kernel so tiled and reference passes
// perform identical arithmetic.
struct PixelHit {
  double dx, dy, gauss, alpha;
  bool clamped;
};

inline bool hit_test(const Splat2D& s, double px, double py, double cutoff2, double alpha_max,
                     PixelHit& hit) {
  hit.dx = px - s.mean.x();
  hit.dy = py - s.mean.y();
  const double q = s.conic[0] * hit.dx * hit.dx + 2.0 * s.conic[1] * hit.dx * hit.dy +
                   s.conic[2] * hit.dy * hit.dy;
  if (q > cutoff2) return false;
  hit.gauss = std::exp(-0.5 * q);
  const double a = s.opacity * hit.gauss;
  hit.clamped = a > alpha_max;
  hit.alpha = hit.clamped ? alpha_max : a;
  return true;
}

// Gradient of the loss with respect to one splat's screen-space quantities.
struct Grad2D {
  double mean_x = 0, mean_y = 0;
  double conic_a = 0, conic_b = 0, conic_c = 0;
  double r = 0, g = 0, b = 0;
  double opacity = 0;

  Grad2D& operator+=(const Grad2D& o) {
    mean_x += o.mean_x;
    mean_y += o.mean_y;
    conic_a += o.conic_a;
    conic_b += o.conic_b;
    conic_c += o.conic_c;
    r += o.r;
    g += o.g;
    b += o.b;
    opacity += o.opacity;
    return *this;
  }
};

std::vector<std::optional<Splat2D>> project_all(std::span<const GaussianParams> gaussians,
                                                const CameraView& cam, const RenderConfig& cfg) {
  std::vector<std::optional<Splat2D>> splats(gaussians.size());
  const auto n = static_cast<std::int64_t>(gaussians.size());
#pragma omp parallel for schedule(static) num_threads(worker_threads())
  for (std::int64_t i = 0; i < n; ++i) splats[i] = project_gaussian(gaussians[i], cam, cfg);
  return splats;
}

std::vector<std::uint32_t> depth_order(const std::vector<std::optional<Splat2D>>& splats) {
  std::vector<std::uint32_t> order;
  for (std::size_t i = 0; i < splats.size(); ++i) {
    if (splats[i]) order.push_back(static_cast<std::uint32_t>(i));
  }
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const double da = splats[a]->depth, db = splats[b]->depth;
    return da < db || (da == db && a < b);
  });
  return order;
}

CameraView strip_target(const CameraView& cam) {
  CameraView c = cam;
  c.target.reset();
  return c;
}

// Blends one pixel over `ids` (already depth sorted). Returns the number of
// list entries consumed and writes the color and final transmittance.
template <typename IdList>
std::uint32_t blend_pixel(const std::vector<std::optional<Splat2D>>& splats, const IdList& ids,
                          double px, double py, const RenderConfig& cfg, Vec3& color,
                          double& transmittance) {
  const double cutoff2 = cfg.cutoff_sigma * cfg.cutoff_sigma;
  double t = 1.0;
  Vec3 c = Vec3::Zero();
  std::uint32_t last = 0;
  PixelHit hit;
  for (std::uint32_t k = 0; k < ids.size(); ++k) {
    const Splat2D& s = *splats[ids[k]];
    if (!hit_test(s, px, py, cutoff2, cfg.alpha_max, hit)) continue;
    c += s.rgb * (hit.alpha * t);
    t *= 1.0 - hit.alpha;
    last = k + 1;
    if (t < cfg.min_transmittance) break;
  }
  color = c + t * cfg.background;
  transmittance = t;
  return last;
}

// Reverse traversal of one pixel's blend, emitting per-splat screen-space
// gradients through `emit(list_index, grad)`.
template <typename IdList, typename Emit>
void backprop_pixel(const std::vector<std::optional<Splat2D>>& splats, const IdList& ids,
                    std::uint32_t contributors, double final_t, double px, double py,
                    const Vec3& dl_dpixel, const RenderConfig& cfg, Emit&& emit) {
  if (dl_dpixel.isZero()) return;
  const double cutoff2 = cfg.cutoff_sigma * cfg.cutoff_sigma;
  double t = final_t;
  Vec3 behind = final_t * cfg.background;  // color contributed by everything after splat i
  PixelHit hit;
  for (std::uint32_t k = contributors; k-- > 0;) {
    const Splat2D& s = *splats[ids[k]];
    if (!hit_test(s, px, py, cutoff2, cfg.alpha_max, hit)) continue;
    const double one_minus = 1.0 - hit.alpha;
    t /= one_minus;  // transmittance in front of splat k
    Grad2D g;
    const double w = hit.alpha * t;
    g.r = dl_dpixel.x() * w;
    g.g = dl_dpixel.y() * w;
    g.b = dl_dpixel.z() * w;
    const double dl_dalpha = dl_dpixel.dot(s.rgb * t - behind / one_minus);
    behind += s.rgb * w;
    if (!hit.clamped) {
      g.opacity = dl_dalpha * hit.gauss;
      // q = a dx^2 + 2 b dx dy + c dy^2, gauss = exp(-q / 2)
      const double dl_dq = dl_dalpha * s.opacity * hit.gauss * -0.5;
      g.mean_x = dl_dq * -2.0 * (s.conic[0] * hit.dx + s.conic[1] * hit.dy);
      g.mean_y = dl_dq * -2.0 * (s.conic[1] * hit.dx + s.conic[2] * hit.dy);
      g.conic_a = dl_dq * hit.dx * hit.dx;
      g.conic_b = dl_dq * 2.0 * hit.dx * hit.dy;
      g.conic_c = dl_dq * hit.dy * hit.dy;
    }
    emit(k, g);
  }
}

// Chain rule from screen-space gradients to raw 3D parameters.
GaussianGradient backprop_gaussian(const GaussianParams& gp, const Splat2D& s,
                                   const CameraView& cam, const Grad2D& g2) {
  GaussianGradient out;

  const Quat qn = gp.unit_rotation();
  const Mat3 rot = quat_to_matrix(qn);

  // Color: SH coefficients and the view direction, taken in the splat frame
  // (dir_local = R^T dir).
  const Vec3 v = gp.position - cam.center();
  const double vnorm = v.norm();
  const Vec3 dir = v / vnorm;
  const Vec3 dir_local = rot.transpose() * dir;
  const auto basis = sh_basis(dir_local);
  const auto dbasis = sh_basis_gradient(dir_local);
  const std::array<double, 3> dl_drgb = {s.rgb_clamped[0] ? 0.0 : g2.r,
                                         s.rgb_clamped[1] ? 0.0 : g2.g,
                                         s.rgb_clamped[2] ? 0.0 : g2.b};
  Vec3 dl_ddir_local = Vec3::Zero();
  for (int k = 0; k < kShBasisCount; ++k) {
    for (int c = 0; c < 3; ++c) {
      out.sh[3 * k + c] = dl_drgb[c] * basis[k];
      dl_ddir_local += dl_drgb[c] * gp.sh[3 * k + c] * dbasis[k];
    }
  }
  const Vec3 dl_ddir = rot * dl_ddir_local;
  Vec3 dl_dpos = (dl_ddir - dir * dir.dot(dl_ddir)) / vnorm;

  const double o = s.opacity;
  out.opacity_logit = g2.opacity * o * (1.0 - o);

  // Conic -> screen covariance: dL/dSigma' = -Q (dL/dQ) Q.
  const double det = s.cov.determinant();
  Mat2 q;
  q << s.cov(1, 1) / det, -s.cov(0, 1) / det, -s.cov(0, 1) / det, s.cov(0, 0) / det;
  Mat2 dl_dq;
  dl_dq << g2.conic_a, 0.5 * g2.conic_b, 0.5 * g2.conic_b, g2.conic_c;
  const Mat2 dl_dcov2 = -q * dl_dq * q;

  const Vec3& t = s.cam_position;
  const double inv_z = 1.0 / t.z();
  const double inv_z2 = inv_z * inv_z;
  Eigen::Matrix<double, 2, 3> jac;
  jac << cam.fx * inv_z, 0, -cam.fx * t.x() * inv_z2,
         0, cam.fy * inv_z, -cam.fy * t.y() * inv_z2;
  const Eigen::Matrix<double, 2, 3> tw = jac * cam.rotation;

  const Vec3 scale = gp.scale();
  const Mat3 m = rot * scale.asDiagonal();
  const Mat3 sigma = m * m.transpose();

  const Eigen::Matrix<double, 2, 3> dl_dtw = 2.0 * dl_dcov2 * tw * sigma;
  const Mat3 dl_dsigma = tw.transpose() * dl_dcov2 * tw;
  const Eigen::Matrix<double, 2, 3> dl_djac = dl_dtw * cam.rotation.transpose();

  // Camera-space mean through the Jacobian and the projected center.
  Vec3 dl_dt;
  dl_dt.x() = dl_djac(0, 2) * (-cam.fx * inv_z2) + g2.mean_x * cam.fx * inv_z;
  dl_dt.y() = dl_djac(1, 2) * (-cam.fy * inv_z2) + g2.mean_y * cam.fy * inv_z;
  dl_dt.z() = dl_djac(0, 0) * (-cam.fx * inv_z2) +
              dl_djac(0, 2) * (2.0 * cam.fx * t.x() * inv_z2 * inv_z) +
              dl_djac(1, 1) * (-cam.fy * inv_z2) +
              dl_djac(1, 2) * (2.0 * cam.fy * t.y() * inv_z2 * inv_z) +
              g2.mean_x * (-cam.fx * t.x() * inv_z2) + g2.mean_y * (-cam.fy * t.y() * inv_z2);
  dl_dpos += cam.rotation.transpose() * dl_dt;
  out.position = dl_dpos;

  // Sigma = M M^T, M = R S.
  const Mat3 dl_dm = 2.0 * dl_dsigma * m;
  // dir_local_i = sum_j R_ji dir_j
  Mat3 dl_drot = dir * dl_ddir_local.transpose();
  for (int j = 0; j < 3; ++j) {
    out.log_scale[j] = scale[j] * dl_dm.col(j).dot(rot.col(j));
    dl_drot.col(j) += dl_dm.col(j) * scale[j];
  }

  const double w = qn[0], x = qn[1], y = qn[2], z = qn[3];
  Quat dl_dqn;
  // d R_ij / d (w, x, y, z), row-major over (i, j).
  dl_dqn[0] = 2 * (-z * dl_drot(0, 1) + y * dl_drot(0, 2) + z * dl_drot(1, 0) -
                   x * dl_drot(1, 2) - y * dl_drot(2, 0) + x * dl_drot(2, 1));
  dl_dqn[1] = 2 * (y * dl_drot(0, 1) + z * dl_drot(0, 2) + y * dl_drot(1, 0) -
                   2 * x * dl_drot(1, 1) - w * dl_drot(1, 2) + z * dl_drot(2, 0) +
                   w * dl_drot(2, 1) - 2 * x * dl_drot(2, 2));
  dl_dqn[2] = 2 * (-2 * y * dl_drot(0, 0) + x * dl_drot(0, 1) + w * dl_drot(0, 2) +
                   x * dl_drot(1, 0) + z * dl_drot(1, 2) - w * dl_drot(2, 0) +
                   z * dl_drot(2, 1) - 2 * y * dl_drot(2, 2));
  dl_dqn[3] = 2 * (-2 * z * dl_drot(0, 0) - w * dl_drot(0, 1) + x * dl_drot(0, 2) +
                   w * dl_drot(1, 0) - 2 * z * dl_drot(1, 1) + y * dl_drot(1, 2) +
                   x * dl_drot(2, 0) + y * dl_drot(2, 1));
  const double qnorm = gp.rotation.norm();
  out.rotation = (dl_dqn - qn * qn.dot(dl_dqn)) / qnorm;
  return out;
}

GradientBuffer lift_gradients(std::span<const GaussianParams> gaussians,
                              const std::vector<std::optional<Splat2D>>& splats,
                              const CameraView& cam, const std::vector<Grad2D>& grads2d,
                              std::span<const std::uint8_t> frozen) {
  GradientBuffer out(gaussians.size());
  const auto n = static_cast<std::int64_t>(gaussians.size());
#pragma omp parallel for schedule(static) num_threads(worker_threads())
  for (std::int64_t i = 0; i < n; ++i) {
    if (!splats[i]) continue;
    if (!frozen.empty() && frozen[i]) continue;
    out[i] = backprop_gaussian(gaussians[i], *splats[i], cam, grads2d[i]);
  }
  return out;
}

void check_loss_grad(const Image& loss_grad, const CameraView& cam) {
  if (loss_grad.width() != cam.width || loss_grad.height() != cam.height) {
    throw std::invalid_argument("loss gradient does not match the camera resolution");
  }
}

}  // namespace

ForwardState render_forward(std::span<const GaussianParams> gaussians, const CameraView& cam,
                            const RenderConfig& cfg) {
  ForwardState st;
  st.camera = strip_target(cam);
  st.config = cfg;
  st.image = Image(cam.width, cam.height);
  st.splats = project_all(gaussians, cam, cfg);
  st.order = depth_order(st.splats);

  const int ts = cfg.tile_size;
  st.tiles_x = (cam.width + ts - 1) / ts;
  st.tiles_y = (cam.height + ts - 1) / ts;
  st.tile_lists.assign(static_cast<std::size_t>(st.tiles_x) * st.tiles_y, {});
  for (std::uint32_t id : st.order) {
    const Splat2D& s = *st.splats[id];
    const int x0 = std::max(0, static_cast<int>(std::floor(s.mean.x() - s.radius)) / ts);
    const int x1 = std::min(st.tiles_x - 1,
                            std::max(0, static_cast<int>(std::ceil(s.mean.x() + s.radius))) / ts);
    const int y0 = std::max(0, static_cast<int>(std::floor(s.mean.y() - s.radius)) / ts);
    const int y1 = std::min(st.tiles_y - 1,
                            std::max(0, static_cast<int>(std::ceil(s.mean.y() + s.radius))) / ts);
    for (int ty = y0; ty <= y1; ++ty) {
      for (int tx = x0; tx <= x1; ++tx) st.tile_lists[ty * st.tiles_x + tx].push_back(id);
    }
  }

  st.final_transmittance.assign(st.image.pixel_count(), 1.0);
  st.contributors.assign(st.image.pixel_count(), 0);
  const auto tile_count = static_cast<std::int64_t>(st.tile_lists.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_threads())
  for (std::int64_t tile = 0; tile < tile_count; ++tile) {
    const auto& ids = st.tile_lists[tile];
    const int tx = static_cast<int>(tile % st.tiles_x), ty = static_cast<int>(tile / st.tiles_x);
    const int xe = std::min(cam.width, (tx + 1) * ts), ye = std::min(cam.height, (ty + 1) * ts);
    for (int y = ty * ts; y < ye; ++y) {
      for (int x = tx * ts; x < xe; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
        Vec3 color;
        st.contributors[p] = blend_pixel(st.splats, ids, x, y, cfg, color, st.final_transmittance[p]);
        st.image.set_rgb(x, y, color);
      }
    }
  }
  return st;
}

Image render(std::span<const GaussianParams> gaussians, const CameraView& cam,
             const RenderConfig& cfg) {
  return render_forward(gaussians, cam, cfg).image;
}

GradientBuffer render_backward(const ForwardState& st, std::span<const GaussianParams> gaussians,
                               const Image& loss_grad, std::span<const std::uint8_t> frozen) {
  const CameraView& cam = st.camera;
  const RenderConfig& cfg = st.config;
  check_loss_grad(loss_grad, cam);
  const int ts = cfg.tile_size;
  const auto tile_count = static_cast<std::int64_t>(st.tile_lists.size());
  std::vector<std::vector<Grad2D>> partial(st.tile_lists.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_threads())
  for (std::int64_t tile = 0; tile < tile_count; ++tile) {
    const auto& ids = st.tile_lists[tile];
    auto& local = partial[tile];
    local.assign(ids.size(), Grad2D{});
    const int tx = static_cast<int>(tile % st.tiles_x), ty = static_cast<int>(tile / st.tiles_x);
    const int xe = std::min(cam.width, (tx + 1) * ts), ye = std::min(cam.height, (ty + 1) * ts);
    for (int y = ty * ts; y < ye; ++y) {
      for (int x = tx * ts; x < xe; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
        backprop_pixel(st.splats, ids, st.contributors[p], st.final_transmittance[p], x, y,
                       loss_grad.rgb(x, y), cfg,
                       [&](std::uint32_t k, const Grad2D& g) { local[k] += g; });
      }
    }
  }
  std::vector<Grad2D> grads2d(gaussians.size());
  for (std::size_t tile = 0; tile < st.tile_lists.size(); ++tile) {
    const auto& ids = st.tile_lists[tile];
    for (std::size_t k = 0; k < ids.size(); ++k) grads2d[ids[k]] += partial[tile][k];
  }
  return lift_gradients(gaussians, st.splats, cam, grads2d, frozen);
}

GradientBuffer render_with_gradients(std::span<const GaussianParams> gaussians,
                                     const CameraView& cam, const RenderConfig& cfg,
                                     const Image& loss_grad,
                                     std::span<const std::uint8_t> frozen) {
  return render_backward(render_forward(gaussians, cam, cfg), gaussians, loss_grad, frozen);
}

Image render_reference(std::span<const GaussianParams> gaussians, const CameraView& cam,
                       const RenderConfig& cfg) {
  std::vector<std::optional<Splat2D>> splats(gaussians.size());
  for (std::size_t i = 0; i < gaussians.size(); ++i) splats[i] = project_gaussian(gaussians[i], cam, cfg);
  const auto order = depth_order(splats);
  Image img(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      Vec3 color;
      double t;
      blend_pixel(splats, order, x, y, cfg, color, t);
      img.set_rgb(x, y, color);
    }
  }
  return img;
}

GradientBuffer render_with_gradients_reference(std::span<const GaussianParams> gaussians,
                                               const CameraView& cam, const RenderConfig& cfg,
                                               const Image& loss_grad,
                                               std::span<const std::uint8_t> frozen) {
  check_loss_grad(loss_grad, cam);
  std::vector<std::optional<Splat2D>> splats(gaussians.size());
  for (std::size_t i = 0; i < gaussians.size(); ++i) splats[i] = project_gaussian(gaussians[i], cam, cfg);
  const auto order = depth_order(splats);
  std::vector<Grad2D> grads2d(gaussians.size());
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      Vec3 color;
      double t;
      const auto last = blend_pixel(splats, order, x, y, cfg, color, t);
      backprop_pixel(splats, order, last, t, x, y, loss_grad.rgb(x, y), cfg,
                     [&](std::uint32_t k, const Grad2D& g) { grads2d[order[k]] += g; });
    }
  }
  GradientBuffer out(gaussians.size());
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    if (!splats[i] || (!frozen.empty() && frozen[i])) continue;
    out[i] = backprop_gaussian(gaussians[i], *splats[i], cam, grads2d[i]);
  }
  return out;
}

}  // namespace lodsplat
