#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gspose/error.hpp"
#include "gspose/parallel.hpp"
#include "gspose/render.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace gspose;
using namespace gspose::testing;

namespace {

Camera axis_camera(int size) {
  Camera cam;
  cam.width = cam.height = size;
  cam.fx = cam.fy = size;
  cam.cx = cam.cy = size / 2;
  return cam;
}

Gaussian3D on_axis(double depth, double opacity, const Vec3& color, double sigma = 0.05) {
  Gaussian3D g;
  g.mean = Vec3(0, 0, depth);
  g.log_scale = Vec3::Constant(std::log(sigma));
  g.opacity_logit = logit(opacity);
  g.color = color;
  return g;
}

RenderConfig exact_config() {
  RenderConfig cfg;
  cfg.alpha_cutoff = 0.0;
  cfg.transmittance_floor = 0.0;
  return cfg;
}

}  // namespace

TEST(Render, SingleSplatCenterPixel) {
  GaussianCloud cloud;
  cloud.splats.push_back(on_axis(3.0, 0.9, Vec3(1, 0, 0)));
  const Camera cam = axis_camera(32);
  const ImageBuffer img = render(cloud, cam, {});
  EXPECT_NEAR(img.at(16, 16, 0), 0.9, 1e-12);
  EXPECT_EQ(img.at(16, 16, 1), 0.0);
  EXPECT_EQ(img.at(16, 16, 2), 0.0);
}

TEST(Render, TwoSplatCompositing) {
  GaussianCloud cloud;
  const Vec3 c1(0.2, 0.5, 0.9), c2(0.8, 0.1, 0.3), bg(0.1, 0.2, 0.3);
  // Back splat stored first; sorting decides the order.
  cloud.splats.push_back(on_axis(4.0, 0.6, c2));
  cloud.splats.push_back(on_axis(2.0, 0.3, c1));
  RenderConfig cfg;
  cfg.background = bg;
  const ImageBuffer img = render(cloud, axis_camera(32), cfg);
  const double a1 = 0.3, a2 = 0.6;
  const Vec3 expected = c1 * a1 + c2 * a2 * (1 - a1) + bg * (1 - a1) * (1 - a2);
  for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(img.at(16, 16, ch), expected[ch], 1e-12);
}

TEST(Render, MatchesNaiveOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const GaussianCloud cloud = random_cloud(rng, 30);
    const Camera cam = random_camera(rng, 40, 30);
    RenderConfig cfg = exact_config();
    cfg.tile_size = 1 + trial * 3;
    cfg.background = Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
    const ImageBuffer tiled = render(cloud, cam, cfg);
    const ImageBuffer naive = naive_render(cloud, cam, cfg);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < tiled.size(); ++i) max_diff = std::max(max_diff, std::abs(tiled.data[i] - naive.data[i]));
    EXPECT_LT(max_diff, 1e-6);
  }
}

TEST(Render, DefaultCutoffMatchesNaiveWithSameCutoff) {
  Rng rng(22);
  const GaussianCloud cloud = random_cloud(rng, 40);
  const Camera cam = random_camera(rng, 48, 48);
  RenderConfig cfg;
  cfg.transmittance_floor = 0.0;
  const ImageBuffer tiled = render(cloud, cam, cfg);
  const ImageBuffer naive = naive_render(cloud, cam, cfg);
  for (std::size_t i = 0; i < tiled.size(); ++i) ASSERT_NEAR(tiled.data[i], naive.data[i], 1e-12);
}

TEST(Render, ZeroOpacityGivesBackground) {
  Rng rng(23);
  GaussianCloud cloud = random_cloud(rng, 20);
  for (auto& s : cloud.splats) s.opacity_logit = -1e4;
  RenderConfig cfg = exact_config();
  cfg.background = Vec3(0.25, 0.5, 0.75);
  const ImageBuffer img = render(cloud, random_camera(rng, 24, 24), cfg);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x)
      for (int c = 0; c < 3; ++c) ASSERT_EQ(img.at(x, y, c), cfg.background[c]);
}

TEST(Render, StorageOrderDoesNotMatter) {
  Rng rng(24);
  GaussianCloud cloud = random_cloud(rng, 40);
  const Camera cam = random_camera(rng, 40, 40);
  const ImageBuffer a = render(cloud, cam, {});
  std::shuffle(cloud.splats.begin(), cloud.splats.end(), rng);
  const ImageBuffer b = render(cloud, cam, {});
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a.data[i], b.data[i], 1e-6);
}

TEST(Render, AlphaIsMonotoneAndBounded) {
  Rng rng(25);
  const GaussianCloud cloud = random_cloud(rng, 40);
  const auto out = render_forward(cloud, random_camera(rng, 32, 32), {});
  for (double a : out.alpha.data) {
    ASSERT_GE(a, 0.0);
    ASSERT_LE(a, 1.0);
  }
  EXPECT_GT(out.stats.visible, 0u);
}

TEST(Render, EmptyCloudThrows) {
  EXPECT_THROW(render(GaussianCloud{}, axis_camera(8), {}), Error);
}

TEST(Render, BehindCameraIsSkippedNotFatal) {
  GaussianCloud cloud;
  cloud.splats.push_back(on_axis(-2.0, 0.9, Vec3(1, 1, 1)));
  cloud.splats.push_back(on_axis(2.0, 0.5, Vec3(1, 1, 1)));
  const auto out = render_forward(cloud, axis_camera(16), {});
  EXPECT_EQ(out.stats.culled, 1u);
  EXPECT_NEAR(out.image.at(8, 8, 0), 0.5, 1e-12);
}

TEST(RenderBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(26);
  const GaussianCloud cloud = random_cloud(rng, 10);
  const Camera cam = random_camera(rng, 32, 32);
  const auto g = render_backward(cloud, cam, {}, ImageBuffer(32, 32, 3));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_EQ(g.mean[i], Vec3::Zero());
    EXPECT_EQ(g.log_scale[i], Vec3::Zero());
    EXPECT_EQ(g.rotation[i], Quat::Zero());
    EXPECT_EQ(g.opacity_logit[i], 0.0);
    EXPECT_EQ(g.color[i], Vec3::Zero());
  }
}

TEST(RenderBackward, ColorGradientOfCenterPixel) {
  GaussianCloud cloud;
  cloud.splats.push_back(on_axis(3.0, 0.7, Vec3(0.3, 0.3, 0.3)));
  const Camera cam = axis_camera(32);
  ImageBuffer upstream(32, 32, 3);
  for (int c = 0; c < 3; ++c) upstream.at(16, 16, c) = 1.0;
  const auto g = render_backward(cloud, cam, {}, upstream);
  EXPECT_LT((g.color[0] - Vec3::Constant(0.7)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RenderBackward, StaleForwardStateIsRejected) {
  Rng rng(27);
  GaussianCloud cloud = random_cloud(rng, 5);
  const Camera cam = random_camera(rng, 16, 16);
  const auto fwd = render_forward(cloud, cam, {});
  cloud.splats[2].color.x() += 0.1;
  EXPECT_THROW(render_backward(cloud, cam, {}, fwd, ImageBuffer(16, 16, 3)), Error);
  try {
    render_backward(cloud, cam, {}, fwd, ImageBuffer(16, 16, 3));
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StaleForwardState);
  }
}

TEST(RenderBackward, MatchesFiniteDifferences) {
  Rng rng(28);
  for (int trial = 0; trial < 3; ++trial) {
    const GaussianCloud cloud = random_cloud(rng, 10);
    const Camera cam = random_camera(rng, 32, 32);
    RenderConfig cfg = exact_config();
    cfg.background = Vec3(0.1, 0.4, 0.2);
    const auto r = check_render_gradients(cloud, cam, cfg);
    for (int c = 0; c < kParamClassCount; ++c) {
      EXPECT_LT(r.max_rel[c], 1e-3) << param_class_name(c) << " worst: " << r.worst;
    }
  }
}

TEST(RenderBackward, DeterministicAcrossThreadCounts) {
  Rng rng(29);
  const GaussianCloud cloud = random_cloud(rng, 60);
  const Camera cam = random_camera(rng, 64, 64);
  ImageBuffer up = random_image(rng, 64, 64);
  set_num_threads(1);
  const auto a = render_backward(cloud, cam, {}, up);
  set_num_threads(4);
  const auto b = render_backward(cloud, cam, {}, up);
  set_num_threads(1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    ASSERT_EQ(a.mean[i], b.mean[i]);
    ASSERT_EQ(a.rotation[i], b.rotation[i]);
    ASSERT_EQ(a.color[i], b.color[i]);
  }
}
