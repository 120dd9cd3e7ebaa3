#include <gtest/gtest.h>

#include <cmath>

#include "gspose/error.hpp"
#include "gspose/loss.hpp"
#include "support/oracles.hpp"

using namespace gspose;
using namespace gspose::testing;

TEST(L1, IdenticalImages) {
  Rng rng(1);
  const ImageBuffer a = random_image(rng, 8, 6);
  const auto r = l1(a, a);
  EXPECT_EQ(r.value, 0.0);
  for (double g : r.grad_a.data) EXPECT_EQ(g, 0.0);
}

TEST(L1, ConstantDifference) {
  const ImageBuffer a(7, 5, 3, 1.0), b(7, 5, 3, 0.75);
  const auto r = l1(a, b);
  EXPECT_DOUBLE_EQ(r.value, 0.25);
  for (double g : r.grad_a.data) EXPECT_DOUBLE_EQ(g, 1.0 / 105.0);
}

TEST(L1, FiniteDifferencesAndSymmetry) {
  Rng rng(2);
  const ImageBuffer a = random_image(rng, 10, 10), b = random_image(rng, 10, 10);
  const auto r = l1(a, b);
  EXPECT_DOUBLE_EQ(r.value, l1(b, a).value);
  for (int k = 0; k < 20; ++k) {
    const std::size_t i = static_cast<std::size_t>(uniform(rng, 0, a.size() - 1));
    ImageBuffer probe = a;
    const double fd = central_difference(
        [&](double x) {
          probe.data[i] = x;
          return l1(probe, b).value;
        },
        a.data[i], 1e-7);
    EXPECT_LT(rel_err(r.grad_a.data[i], fd), 1e-6);
  }
}

TEST(L1, ShapeMismatch) { EXPECT_THROW(l1(ImageBuffer(4, 4), ImageBuffer(4, 5)), Error); }

TEST(Ssim, IdenticalImagesGiveOne) {
  Rng rng(3);
  const ImageBuffer a = random_image(rng, 20, 16);
  EXPECT_NEAR(ssim(a, a).value, 1.0, 1e-12);
  EXPECT_NEAR(combined(a, a).value, 0.0, 1e-12);
}

TEST(Ssim, ZeroVarianceClosedForm) {
  const ImageBuffer a(16, 16, 3, 0.0), b(16, 16, 3, 1.0);
  LossConfig cfg;
  EXPECT_NEAR(ssim(a, b, cfg).value, cfg.c1 / (1.0 + cfg.c1), 1e-12);
}

TEST(Ssim, MatchesDirectDefinition) {
  Rng rng(4);
  LossConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    const ImageBuffer a = random_image(rng, 18, 15), b = random_image(rng, 18, 15);
    EXPECT_NEAR(ssim(a, b, cfg).value, ssim_direct(a, b, cfg), 1e-8);
    EXPECT_NEAR(ssim(a, b, cfg).value, ssim(b, a, cfg).value, 1e-12);
  }
}

TEST(Ssim, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  LossConfig cfg;
  cfg.ssim_window = 7;
  const ImageBuffer a = random_image(rng, 16, 14), b = random_image(rng, 16, 14);
  const auto r = ssim(a, b, cfg);
  for (std::size_t i = 0; i < a.size(); i += 7) {
    ImageBuffer probe = a;
    const double fd = central_difference(
        [&](double x) {
          probe.data[i] = x;
          return ssim(probe, b, cfg).value;
        },
        a.data[i], 1e-5);
    EXPECT_LT(rel_err(r.grad_a.data[i], fd, 1e-9), 1e-4) << "index " << i;
  }
}

TEST(Ssim, Errors) {
  EXPECT_THROW(ssim(ImageBuffer(8, 8), ImageBuffer(8, 8)), Error);  // smaller than 11x11
  EXPECT_THROW(ssim(ImageBuffer(12, 12), ImageBuffer(12, 13)), Error);
  LossConfig bad;
  bad.ssim_window = 4;
  EXPECT_THROW(ssim(ImageBuffer(12, 12), ImageBuffer(12, 12), bad), Error);
}

TEST(Combined, EndpointsAndRecomposition) {
  Rng rng(6);
  const ImageBuffer a = random_image(rng, 16, 16), b = random_image(rng, 16, 16);
  LossConfig cfg;
  cfg.lambda = 0.0;
  EXPECT_EQ(combined(a, b, cfg).value, l1(a, b).value);
  cfg.lambda = 1.0;
  EXPECT_EQ(combined(a, b, cfg).value, 1.0 - ssim(a, b, cfg).value);
  cfg.lambda = 0.2;
  const double expected = 0.8 * l1(a, b).value + 0.2 * (1.0 - ssim(a, b, cfg).value);
  EXPECT_LT(std::abs(combined(a, b, cfg).value - expected), 1e-12);
}

TEST(Combined, NonNegativeOnNonNegativeImages) {
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const ImageBuffer a = random_image(rng, 12, 12), b = random_image(rng, 12, 12);
    EXPECT_GE(combined(a, b).value, 0.0);
  }
}
