#pragma once

#include "lodsplat/image.hpp"

#include <array>
#include <limits>

namespace lodsplat {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean squared error over all channels. Throws std::invalid_argument on a
/// size mismatch.
double mse(const Image& a, const Image& b);

/// -10 log10(MSE) for values in [0, 1]; +infinity for identical images.
double psnr(const Image& a, const Image& b);

/// Gaussian-windowed SSIM (11x11, sigma 1.5) averaged over every window that
/// fits entirely inside the image and over the three channels. Throws
/// std::invalid_argument when a side is shorter than the window.
double ssim(const Image& a, const Image& b);

struct SsimGradient {
  double value = 0;
  /// d ssim / d a, same shape as the inputs.
  Image grad;
};

SsimGradient ssim_with_gradient(const Image& a, const Image& b);

/// Normalized 1D Gaussian window used by ssim().
std::array<double, kSsimWindow> ssim_window();

}  // namespace lodsplat
