#include "lodsplat/optimizer.hpp"

#include "lodsplat/metrics.hpp"
#include "lodsplat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lodsplat {

void TrainConfig::validate() const {
  if (l1_weight < 0 || dssim_weight < 0 || std::abs(l1_weight + dssim_weight - 1.0) > 1e-12) {
    throw std::invalid_argument("loss weights must be non-negative and sum to 1");
  }
  if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (log_interval <= 0) throw std::invalid_argument("log interval must be positive");
  if (!(lr.position > 0)) throw std::invalid_argument("position learning rate must be positive");
}

LossResult loss(const Image& rendered, const Image& target, double l1_weight,
                double dssim_weight) {
  if (!rendered.same_shape(target)) throw std::invalid_argument("loss: image sizes differ");
  LossResult r;
  const auto& a = rendered.data();
  const auto& b = target.data();
  const double n = static_cast<double>(a.size());
  r.grad = Image(rendered.width(), rendered.height());
  auto& g = r.grad.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    r.l1 += std::abs(d);
    g[i] = l1_weight * (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / n;
  }
  r.l1 /= n;
  r.value = l1_weight * r.l1;
  if (dssim_weight > 0) {
    const SsimGradient s = ssim_with_gradient(rendered, target);
    r.ssim = s.value;
    r.value += dssim_weight * 0.5 * (1.0 - s.value);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= 0.5 * dssim_weight * s.grad.data()[i];
  } else {
    r.ssim = ssim(rendered, target);
  }
  return r;
}

double adaptive_step(double param, double grad, Moments& mo, double lr, std::uint64_t step,
                     const AdamConfig& cfg) {
  if (!std::isfinite(grad)) throw std::domain_error("non-finite gradient");
  mo.m = cfg.beta1 * mo.m + (1 - cfg.beta1) * grad;
  mo.v = cfg.beta2 * mo.v + (1 - cfg.beta2) * grad * grad;
  const double t = static_cast<double>(step);
  const double m_hat = mo.m / (1 - std::pow(cfg.beta1, t));
  const double v_hat = mo.v / (1 - std::pow(cfg.beta2, t));
  return param - lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
}

double StageStats::head_mean() const {
  if (losses.empty()) return 0;
  const std::size_t n = std::max<std::size_t>(1, losses.size() / 10);
  return std::accumulate(losses.begin(), losses.begin() + n, 0.0) / n;
}

double StageStats::tail_mean() const {
  if (losses.empty()) return 0;
  const std::size_t n = std::max<std::size_t>(1, losses.size() / 10);
  return std::accumulate(losses.end() - n, losses.end(), 0.0) / n;
}

namespace {

// Embedded parameters of one splat flattened for the optimizer:
// position 3, rotation 4, log-scale 3, opacity 1, sh 48.
constexpr int kParamCount = 59;
constexpr int kRot = 3, kScale = 7, kOpacity = 10, kSh = 11;

using ParamVec = std::array<double, kParamCount>;

ParamVec pack(const EmbeddedGaussian& g) {
  ParamVec p;
  for (int i = 0; i < 3; ++i) p[i] = g.local_position[i];
  for (int i = 0; i < 4; ++i) p[kRot + i] = g.local_rotation[i];
  for (int i = 0; i < 3; ++i) p[kScale + i] = g.local_log_scale[i];
  p[kOpacity] = g.opacity_logit;
  std::copy(g.sh.begin(), g.sh.end(), p.begin() + kSh);
  return p;
}

void unpack(const ParamVec& p, EmbeddedGaussian& g) {
  for (int i = 0; i < 3; ++i) g.local_position[i] = p[i];
  for (int i = 0; i < 4; ++i) g.local_rotation[i] = p[kRot + i];
  for (int i = 0; i < 3; ++i) g.local_log_scale[i] = p[kScale + i];
  g.opacity_logit = p[kOpacity];
  std::copy(p.begin() + kSh, p.end(), g.sh.begin());
}

// World-space gradient pulled back through X = k R X_l + T, r = q(R) r_l,
// log s = log s_l + log k.
ParamVec local_gradient(const GaussianGradient& gw, const FaceFrame& frame, double k) {
  ParamVec d;
  const Vec3 dp = k * (frame.rotation.transpose() * gw.position);
  const Quat dr = quat_mul(quat_conj(matrix_to_quat(frame.rotation)), gw.rotation);
  for (int i = 0; i < 3; ++i) d[i] = dp[i];
  for (int i = 0; i < 4; ++i) d[kRot + i] = dr[i];
  for (int i = 0; i < 3; ++i) d[kScale + i] = gw.log_scale[i];
  d[kOpacity] = gw.opacity_logit;
  std::copy(gw.sh.begin(), gw.sh.end(), d.begin() + kSh);
  return d;
}

std::array<double, kParamCount> learning_rates(const LearningRates& lr, double extent) {
  std::array<double, kParamCount> out;
  for (int i = 0; i < 3; ++i) out[i] = lr.position * extent;
  for (int i = 0; i < 4; ++i) out[kRot + i] = lr.rotation;
  for (int i = 0; i < 3; ++i) out[kScale + i] = lr.log_scale;
  out[kOpacity] = lr.opacity;
  for (int i = 0; i < 3; ++i) out[kSh + i] = lr.sh_dc;
  for (int i = 3; i < kShCoeffCount; ++i) out[kSh + i] = lr.sh_rest;
  return out;
}

struct ViewRef {
  std::size_t frame;
  std::size_t camera;
};

std::vector<ViewRef> flatten_views(const TrainingSet& data) {
  std::vector<ViewRef> views;
  for (std::size_t k = 0; k < data.size(); ++k) {
    for (std::size_t c = 0; c < data[k].views.size(); ++c) {
      const CameraView& v = data[k].views[c];
      if (!v.target) {
        throw std::invalid_argument("view " + v.id + " of keyframe " + std::to_string(data[k].index) +
                                    " has no target image");
      }
      if (v.target->width() != v.width || v.target->height() != v.height) {
        throw std::invalid_argument("target of view " + v.id + " does not match the camera size");
      }
      views.push_back({k, c});
    }
  }
  if (views.empty()) throw std::invalid_argument("training set is empty");
  return views;
}

}  // namespace

double view_psnr(const AvatarHierarchy& h, const TrainingFrame& frame, const CameraView& view,
                 const RenderConfig& cfg) {
  if (!view.target) throw std::invalid_argument("view " + view.id + " has no target image");
  const auto world = pose_avatar(h, std::span<const Vec3>(frame.vertices));
  return psnr(render(world, view, cfg), *view.target);
}

StageStats train_stage(AvatarHierarchy& h, const TrainingSet& data, int level,
                       const TrainConfig& cfg) {
  cfg.validate();
  const auto views = flatten_views(data);
  if (cfg.probe_view >= views.size()) throw std::invalid_argument("probe view out of range");
  if (std::none_of(h.roots.begin(), h.roots.end(),
                   [&](const RootFace& r) { return r.active() && r.level == level; })) {
    throw HierarchyError("no root face is at level " + std::to_string(level));
  }

  StageStats stats;
  stats.level = level;
  std::vector<std::uint32_t> trainable;
  std::vector<std::uint8_t> frozen(h.gaussians.size(), 1);
  for (std::size_t i = 0; i < h.gaussians.size(); ++i) {
    const auto& g = h.gaussians[i];
    if (g.level == level && !g.frozen) {
      trainable.push_back(static_cast<std::uint32_t>(i));
      frozen[i] = 0;
    }
  }
  stats.trained_gaussians = trainable.size();

  std::vector<PoseFrames> poses;
  poses.reserve(data.size());
  for (const auto& frame : data) poses.push_back(pose_frames(h, std::span<const Vec3>(frame.vertices)));

  const double extent = mesh_extent(h.mesh);
  const auto rates = learning_rates(cfg.lr, extent);
  std::vector<std::array<Moments, kParamCount>> moments(trainable.size());
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, views.size() - 1);

  std::ofstream log;
  if (cfg.log_path) {
    log.open(*cfg.log_path);
    if (!log) throw IoError("cannot write " + cfg.log_path->string());
    log << "iteration,loss,psnr\n" << std::setprecision(17);
  }
  auto probe_psnr = [&] {
    const ViewRef ref = views[cfg.probe_view];
    const auto world = pose_avatar(h, poses[ref.frame]);
    return psnr(render(world, data[ref.frame].views[ref.camera], cfg.render),
                *data[ref.frame].views[ref.camera].target);
  };

  for (int it = 1; it <= cfg.iterations; ++it) {
    const ViewRef ref = views[pick(rng)];
    const PoseFrames& pose = poses[ref.frame];
    const CameraView& view = data[ref.frame].views[ref.camera];

    const auto world = pose_avatar(h, pose);
    const ForwardState fwd = render_forward(world, view, cfg.render);
    const LossResult l = loss(fwd.image, *view.target, cfg.l1_weight, cfg.dssim_weight);
    stats.losses.push_back(l.value);
    const GradientBuffer grads = render_backward(fwd, world, l.grad, frozen);

    const auto n = static_cast<std::int64_t>(trainable.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t t = 0; t < n; ++t) {
      EmbeddedGaussian& g = h.gaussians[trainable[t]];
      const ParamVec d = local_gradient(grads[trainable[t]], pose.frames[g.face], pose.scales[g.face]);
      ParamVec p = pack(g);
      const int first = g.position_frozen ? kRot : 0;
      try {
        for (int i = first; i < kParamCount; ++i) {
          p[i] = adaptive_step(p[i], d[i], moments[t][i], rates[i],
                               static_cast<std::uint64_t>(it), cfg.adam);
        }
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
      unpack(p, g);
    }
    if (error) std::rethrow_exception(error);

    if (log.is_open() && (it % cfg.log_interval == 0 || it == cfg.iterations)) {
      log << it << ',' << l.value << ',' << probe_psnr() << '\n';
    }
  }
  mark_level_optimized(h, level);
  return stats;
}

}  // namespace lodsplat
