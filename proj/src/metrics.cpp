#include "lodsplat/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace lodsplat {

namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("image sizes differ: " + std::to_string(a.width()) + "x" +
                                std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                                "x" + std::to_string(b.height()));
  }
}

// Plane of one channel, row-major.
struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
  double& operator()(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Separable correlation keeping only windows fully inside the plane.
Plane filter_valid(const Plane& src, const std::array<double, kSsimWindow>& k) {
  const int ow = src.w - kSsimWindow + 1, oh = src.h - kSsimWindow + 1;
  Plane rows(ow, src.h);
  for (int y = 0; y < src.h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * src(x + i, y);
      rows(x, y) = s;
    }
  }
  Plane out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * rows(x, y + i);
      out(x, y) = s;
    }
  }
  return out;
}

// Transpose of filter_valid: scatters a window map back onto a w x h plane.
Plane filter_adjoint(const Plane& map, int w, int h, const std::array<double, kSsimWindow>& k) {
  Plane cols(map.w, h);
  for (int y = 0; y < map.h; ++y) {
    for (int x = 0; x < map.w; ++x) {
      const double m = map(x, y);
      for (int i = 0; i < kSsimWindow; ++i) cols(x, y + i) += k[i] * m;
    }
  }
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < map.w; ++x) {
      const double m = cols(x, y);
      for (int i = 0; i < kSsimWindow; ++i) out(x + i, y) += k[i] * m;
    }
  }
  return out;
}

Plane channel(const Image& img, int c) {
  Plane p(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) p(x, y) = img.at(x, y, c);
  }
  return p;
}

Plane product(const Plane& a, const Plane& b) {
  Plane p(a.w, a.h);
  for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
  return p;
}

SsimGradient ssim_impl(const Image& a, const Image& b, bool want_grad) {
  require_same_shape(a, b);
  if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw std::invalid_argument("ssim needs images of at least 11x11 pixels");
  }
  const auto k = ssim_window();
  const int w = a.width(), h = a.height();
  const double windows = 3.0 * (w - kSsimWindow + 1) * (h - kSsimWindow + 1);
  const double norm = 1.0 / windows;
  // Summed before the single division so identical inputs give exactly 1.
  double total = 0;

  SsimGradient out;
  if (want_grad) out.grad = Image(w, h);
  for (int c = 0; c < 3; ++c) {
    const Plane x = channel(a, c), y = channel(b, c);
    const Plane mx = filter_valid(x, k), my = filter_valid(y, k);
    const Plane exx = filter_valid(product(x, x), k);
    const Plane eyy = filter_valid(product(y, y), k);
    const Plane exy = filter_valid(product(x, y), k);

    Plane d_mx(mx.w, mx.h), d_exx(mx.w, mx.h), d_exy(mx.w, mx.h);
    for (std::size_t i = 0; i < mx.v.size(); ++i) {
      const double ux = mx.v[i], uy = my.v[i];
      const double sxx = exx.v[i] - ux * ux, syy = eyy.v[i] - uy * uy;
      const double sxy = exy.v[i] - ux * uy;
      const double a1 = 2 * ux * uy + kSsimC1, a2 = 2 * sxy + kSsimC2;
      const double b1 = ux * ux + uy * uy + kSsimC1, b2 = sxx + syy + kSsimC2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (!want_grad) continue;
      d_mx.v[i] = (2 * uy * a2 - 2 * uy * a1) / (b1 * b2) - s * 2 * ux / b1 + s * 2 * ux / b2;
      d_exx.v[i] = -s / b2;
      d_exy.v[i] = 2 * a1 / (b1 * b2);
    }
    if (!want_grad) continue;
    const Plane g_mx = filter_adjoint(d_mx, w, h, k);
    const Plane g_exx = filter_adjoint(d_exx, w, h, k);
    const Plane g_exy = filter_adjoint(d_exy, w, h, k);
    for (int py = 0; py < h; ++py) {
      for (int px = 0; px < w; ++px) {
        out.grad.at(px, py, c) =
            norm * (g_mx(px, py) + 2 * x(px, py) * g_exx(px, py) + y(px, py) * g_exy(px, py));
      }
    }
  }
  out.value = total / windows;
  return out;
}

}  // namespace

std::array<double, kSsimWindow> ssim_window() {
  std::array<double, kSsimWindow> k{};
  double sum = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    k[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b);
  if (a.empty()) throw std::invalid_argument("mse of empty images");
  double s = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data().size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, false).value; }

SsimGradient ssim_with_gradient(const Image& a, const Image& b) {
  return ssim_impl(a, b, true);
}

}  // namespace lodsplat
