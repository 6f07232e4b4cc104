#include "lodsplat/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

namespace lodsplat {

std::vector<CameraView> orbit_path(int frames, double radius, int width, int height,
                                   double vertical_fov_rad) {
  std::vector<CameraView> path;
  for (int i = 0; i < frames; ++i) {
    const double a = 2.0 * std::numbers::pi * i / frames;
    const Vec3 eye(radius * std::sin(a), 0.0, radius * std::cos(a));
    path.push_back(look_at(eye, Vec3::Zero(), Vec3::UnitY(), vertical_fov_rad, width, height));
  }
  return path;
}

namespace {

std::vector<GaussianParams> pose_copies(const AvatarHierarchy& h, std::span<const Vec3> vertices,
                                        const BenchOptions& o) {
  const auto single = pose_avatar(h, vertices);
  std::vector<GaussianParams> out;
  out.reserve(single.size() * o.multiplicity);
  for (int m = 0; m < o.multiplicity; ++m) {
    const Vec3 offset((m - 0.5 * (o.multiplicity - 1)) * o.spacing, 0, 0);
    for (GaussianParams g : single) {
      g.position += offset;
      out.push_back(g);
    }
  }
  return out;
}

}  // namespace

BenchReport bench(std::span<const BenchAvatar> avatars, const BenchOptions& o) {
  if (o.frames <= 0) throw std::invalid_argument("bench needs at least one frame");
  if (o.multiplicity < 1) throw std::invalid_argument("multiplicity must be at least 1");
  const bool any_dynamic = o.dynamic || o.paired;
  if (any_dynamic && (!o.animation || o.animation->size() == 0)) {
    throw std::invalid_argument("dynamic bench needs an animation");
  }
  if (o.frame_dir) std::filesystem::create_directories(*o.frame_dir);
  const auto path = orbit_path(o.frames, o.radius, o.width, o.height, o.vertical_fov_rad);
  using clock = std::chrono::steady_clock;

  BenchReport report;
  for (const BenchAvatar& a : avatars) {
    if (!a.hierarchy) throw std::invalid_argument("bench avatar " + a.id + " is null");
    const AvatarHierarchy& h = *a.hierarchy;
    if (any_dynamic) o.animation->validate(h.mesh.vertex_count());
    std::vector<GaussianParams> rest;
    if (!o.dynamic || o.paired) rest = pose_copies(h, h.mesh.vertices, o);

    auto frame = [&](int f, bool dynamic) {
      const auto start = clock::now();
      std::vector<GaussianParams> posed;
      if (dynamic) posed = pose_copies(h, o.animation->keyframes[f % o.animation->size()], o);
      const Image img = render(dynamic ? posed : rest, path[f], o.render);
      const double ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
      if (o.frame_dir) {
        char name[40];
        std::snprintf(name, sizeof name, "%sframe%04d.png", o.paired && dynamic ? "dynamic_" : "", f);
        write_png(*o.frame_dir / (a.id + "_" + name), img);
      }
      return ms;
    };

    double static_ms = 0, dynamic_ms = 0;
    for (int f = 0; f < o.frames; ++f) {
      if (!o.paired) {
        (o.dynamic ? dynamic_ms : static_ms) += frame(f, o.dynamic);
      } else if (f % 2 == 0) {
        static_ms += frame(f, false);
        dynamic_ms += frame(f, true);
      } else {
        dynamic_ms += frame(f, true);
        static_ms += frame(f, false);
      }
    }
    if (o.paired || !o.dynamic) {
      report.rows.push_back({a.id, h.gaussians.size(), false, o.multiplicity, static_ms / o.frames, o.frames});
    }
    if (o.paired || o.dynamic) {
      report.rows.push_back({a.id, h.gaussians.size(), true, o.multiplicity, dynamic_ms / o.frames, o.frames});
    }
  }
  return report;
}

void BenchReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "avatar,gaussian_count,mode,multiplicity,mean_frame_ms,frames\n";
  out << std::setprecision(6);
  for (const auto& r : rows) {
    out << r.avatar << ',' << r.gaussian_count << ',' << (r.dynamic ? "dynamic" : "static") << ','
        << r.multiplicity << ',' << r.mean_frame_ms << ',' << r.frames << '\n';
  }
}

void BenchReport::write_json(const std::filesystem::path& path) const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"avatar", r.avatar},
                         {"gaussian_count", r.gaussian_count},
                         {"mode", r.dynamic ? "dynamic" : "static"},
                         {"multiplicity", r.multiplicity},
                         {"mean_frame_ms", r.mean_frame_ms},
                         {"frames", r.frames}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << nlohmann::json{{"rows", rows_json}}.dump(2) << '\n';
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman needs two equal-length samples of size >= 2");
  }
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace lodsplat
