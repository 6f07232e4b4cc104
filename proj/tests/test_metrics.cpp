#include "lodsplat/metrics.hpp"
#include "lodsplat/optimizer.hpp"
#include "ssim_oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <limits>

using namespace lodsplat;

TEST_CASE("psnr") {
  test::Gen gen(1);
  const Image a = test::noise(gen, 16, 16);
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  Image b = a;
  for (double& v : b.data()) v += 0.1;
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  for (double& v : b.data()) v -= 0.09;
  CHECK(psnr(a, b) == doctest::Approx(40.0).epsilon(1e-9));
  CHECK_THROWS_AS(psnr(a, Image(15, 16)), std::invalid_argument);
}

TEST_CASE("psnr is symmetric and decreasing in MSE") {
  test::Gen gen(2);
  for (int i = 0; i < 50; ++i) {
    const Image a = test::noise(gen, 12, 12), b = test::noise(gen, 12, 12);
    CHECK(psnr(a, b) == psnr(b, a));
    Image c = a;
    for (std::size_t k = 0; k < c.data().size(); ++k) c.data()[k] = 0.5 * (a.data()[k] + b.data()[k]);
    CHECK(mse(a, c) < mse(a, b));
    CHECK(psnr(a, c) > psnr(a, b));
  }
}

TEST_CASE("ssim of identical images is 1") {
  test::Gen gen(3);
  const Image a = test::noise(gen, 20, 17);
  CHECK(ssim(a, a) == 1.0);
  CHECK_THROWS_AS(ssim(Image(10, 20), Image(10, 20)), std::invalid_argument);
  CHECK_THROWS_AS(ssim(a, Image(20, 18)), std::invalid_argument);
}

TEST_CASE("ssim matches the per-window oracle") {
  test::Gen gen(4);
  for (int i = 0; i < 10; ++i) {
    const int w = gen.integer(11, 30), h = gen.integer(11, 30);
    const Image a = test::noise(gen, w, h), b = test::noise(gen, w, h);
    CHECK(std::abs(ssim(a, b) - test::ssim_oracle(a, b)) < 1e-6);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
  }
  // Shifted noise against itself.
  const Image n = test::noise(gen, 64, 64);
  Image shifted(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) shifted.set_rgb(x, y, n.rgb((x + 23) % 64, (y + 31) % 64));
  CHECK(std::abs(ssim(n, shifted) - test::ssim_oracle(n, shifted)) < 1e-6);
}

TEST_CASE("ssim of constant images follows the closed form") {
  const Image black(16, 16, 0.0), white(16, 16, 1.0);
  const double closed = (kSsimC1 * kSsimC2) / ((1 + kSsimC1) * kSsimC2);
  CHECK(ssim(black, white) == doctest::Approx(closed).epsilon(1e-9));
  CHECK(test::ssim_oracle(black, white) == doctest::Approx(closed).epsilon(1e-9));
}

TEST_CASE("ssim gradient matches finite differences") {
  test::Gen gen(5);
  Image a = test::noise(gen, 14, 13);
  const Image b = test::noise(gen, 14, 13);
  const auto g = ssim_with_gradient(a, b);
  for (std::size_t i = 0; i < a.data().size(); i += 7) {
    const double saved = a.data()[i];
    a.data()[i] = saved + 1e-5;
    const double p = ssim(a, b);
    a.data()[i] = saved - 1e-5;
    const double m = ssim(a, b);
    a.data()[i] = saved;
    CHECK(g.grad.data()[i] == doctest::Approx((p - m) / 2e-5).epsilon(1e-5).scale(1e-7));
  }
}

TEST_CASE("loss examples") {
  test::Gen gen(6);
  const Image a = test::noise(gen, 16, 16);
  CHECK(std::abs(loss(a, a).value) < 1e-12);

  const Image black(16, 16, 0.0), white(16, 16, 1.0);
  const double s = (kSsimC1 * kSsimC2) / ((1 + kSsimC1) * kSsimC2);
  const double expected = 0.8 + 0.2 * (1 - s) / 2;
  CHECK(loss(black, white).value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.89999).epsilon(1e-5));
  CHECK_THROWS_AS(loss(a, Image(16, 15)), std::invalid_argument);
}

TEST_CASE("loss is symmetric and bounded") {
  test::Gen gen(7);
  for (int i = 0; i < 20; ++i) {
    const Image a = test::noise(gen, 12, 12), b = test::noise(gen, 12, 12);
    const auto ab = loss(a, b), ba = loss(b, a);
    CHECK(ab.l1 == doctest::Approx(ba.l1).epsilon(1e-14));
    CHECK(ab.value == doctest::Approx(ba.value).epsilon(1e-12));
    CHECK(ab.value >= 0);
    CHECK(ab.value <= 1);
  }
}

TEST_CASE("loss gradient matches finite differences") {
  // The smallest image the 11x11 window admits plus margin.
  test::Gen gen(8);
  Image a = test::noise(gen, 16, 16);
  const Image b = test::noise(gen, 16, 16);
  const auto g = loss(a, b);
  int checked = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double saved = a.data()[i];
    if (std::abs(saved - b.data()[i]) < 1e-3) continue;  // L1 kink
    a.data()[i] = saved + 1e-6;
    const double p = loss(a, b).value;
    a.data()[i] = saved - 1e-6;
    const double m = loss(a, b).value;
    a.data()[i] = saved;
    const double fd = (p - m) / 2e-6;
    const double an = g.grad.data()[i];
    CHECK(std::abs(an - fd) <= std::max(1e-3 * std::max(std::abs(an), std::abs(fd)), 1e-9));
    ++checked;
  }
  CHECK(checked > 700);
}
