#pragma once

#include "lodsplat/image.hpp"
#include "support.hpp"

#include <cmath>

namespace test {

// Direct per-window SSIM with a 2D window built from scratch.
inline double ssim_oracle(const Image& a, const Image& b) {
  double w2[11][11];
  double sum = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) sum += (w2[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5));
  for (auto& row : w2)
    for (double& v : row) v /= sum;
  double total = 0;
  int windows = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y + 11 <= a.height(); ++y) {
      for (int x = 0; x + 11 <= a.width(); ++x) {
        double mx = 0, my = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            mx += w2[i][j] * a.at(x + j, y + i, c);
            my += w2[i][j] * b.at(x + j, y + i, c);
          }
        double vx = 0, vy = 0, cxy = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double dx = a.at(x + j, y + i, c) - mx, dy = b.at(x + j, y + i, c) - my;
            vx += w2[i][j] * dx * dx;
            vy += w2[i][j] * dy * dy;
            cxy += w2[i][j] * dx * dy;
          }
        const double c1 = 1e-4, c2 = 9e-4;
        total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++windows;
      }
    }
  }
  return total / windows;
}

inline Image noise(Gen& gen, int w, int h) {
  Image img(w, h);
  for (double& v : img.data()) v = gen.uniform(0, 1);
  return img;
}

}  // namespace test
