#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "gspose/error.hpp"
#include "gspose/metrics.hpp"
#include "gspose/pose.hpp"
#include "support/oracles.hpp"

using namespace gspose;
using namespace gspose::testing;

namespace {

std::vector<View> training_views(Rng& rng, const GaussianCloud& c, int n, int size) {
  std::vector<View> out;
  for (int i = 0; i < n; ++i) {
    const Camera cam = random_camera(rng, size, size);
    out.push_back({render(c, cam, {}), cam});
  }
  return out;
}

Camera perturbed(const Camera& truth, Rng& rng, double angle, double shift) {
  Mat4 delta = Mat4::Identity();
  delta.topLeftCorner<3, 3>() = rodrigues(random_unit_vector(rng), angle);
  delta.topRightCorner<3, 1>() = random_unit_vector(rng) * shift;
  Camera c = truth;
  c.set_world_to_camera(truth.world_to_camera() * delta);
  return c;
}

}  // namespace

TEST(Coarse, SelfMatchIsMaximal) {
  Rng rng(1);
  const GaussianCloud c = random_cloud(rng, 40);
  const auto train = training_views(rng, c, 12, 48);
  const CoarsePose p = coarse_pose(train[7].image, train);
  EXPECT_EQ(p.index, 7u);
  EXPECT_EQ(p.camera.world_to_camera(), train[7].camera.world_to_camera());
  EXPECT_NEAR(p.scores[7], 1.0, 1e-12);
  for (double s : p.scores) EXPECT_LE(s, 1.0 + 1e-12);
}

TEST(Coarse, NoisyQueryStillMatches) {
  Rng rng(2);
  const GaussianCloud c = random_cloud(rng, 40);
  const auto train = training_views(rng, c, 12, 48);
  std::normal_distribution<double> noise(0.0, 0.05);
  ImageBuffer q = train[7].image;
  for (double& v : q.data) v += noise(rng);
  NccMatcher m;
  m.prepare(train);
  const auto scores = m.scores(q);
  const CoarsePose p = coarse_pose(q, train, m);
  EXPECT_EQ(p.index, 7u);
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (i != 7) EXPECT_LT(scores[i], scores[7]);
}

TEST(Coarse, TiesGoToLowestIndex) {
  Rng rng(3);
  const GaussianCloud c = random_cloud(rng, 30);
  auto train = training_views(rng, c, 5, 32);
  train[4] = train[2];
  train[4].camera.cx += 1.0;  // distinguishable camera, identical image
  const CoarsePose p = coarse_pose(train[2].image, train);
  EXPECT_EQ(p.index, 2u);
}

TEST(Coarse, EmptyTrainingSet) {
  try {
    coarse_pose(ImageBuffer(8, 8), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyTrainingSet);
  }
}

TEST(Coarse, DescriptorIsUnitNormOrZero) {
  Rng rng(4);
  NccMatcher m;
  const auto d = m.descriptor(random_image(rng, 100, 80));
  EXPECT_EQ(d.size(), 64u * 64u);
  double n = 0.0;
  for (double v : d) n += v * v;
  EXPECT_NEAR(n, 1.0, 1e-12);
  for (double v : m.descriptor(ImageBuffer(20, 20, 3, 0.3))) EXPECT_EQ(v, 0.0);
}

class RefineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(5);
    cloud = random_cloud(rng, 40);
    cloud.recompute_radius();
    truth = random_camera(rng, 48, 48);
    query = render(cloud, truth, {});
  }
  GaussianCloud cloud;
  Camera truth;
  ImageBuffer query;
};

TEST_F(RefineTest, ZeroStepsIsIdentity) {
  RefineConfig cfg;
  cfg.k = 0;
  const PoseEstimate e = refine_pose(query, truth, cloud, cfg);
  EXPECT_EQ(e.steps, 0);
  EXPECT_TRUE(e.loss_trace.empty());
  EXPECT_EQ(to_matrix(e.transform), Mat4::Identity());
  EXPECT_EQ(e.effective_pose, truth.world_to_camera());
  EXPECT_EQ(e.final_loss, combined(render(cloud, truth, {}), query).value);
}

TEST_F(RefineTest, NoDriftAtTheOptimum) {
  RefineConfig cfg;
  cfg.k = 40;
  const PoseEstimate e = refine_pose(query, truth, cloud, cfg);
  ASSERT_EQ(static_cast<int>(e.loss_trace.size()), e.steps);
  EXPECT_LE(e.final_loss, e.loss_trace.front());
  EXPECT_LT(e.transform.rotation_vector().norm(), 1e-3 * cloud.scene_radius);
  const Vec3 shift = to_matrix(e.transform).topRightCorner<3, 1>();
  EXPECT_LT(shift.norm(), 1e-3 * cloud.scene_radius);
  EXPECT_FALSE(e.degraded);
}

TEST_F(RefineTest, DefaultConfigLowersLossAndRaisesPsnr) {
  Rng rng(6);
  const Camera coarse = perturbed(truth, rng, 3.0 * std::numbers::pi / 180.0, 0.02 * cloud.scene_radius);
  RefineConfig cfg;
  const PoseEstimate e = refine_pose(query, coarse, cloud, cfg);
  EXPECT_EQ(e.steps, 175);
  for (double l : e.loss_trace) ASSERT_TRUE(std::isfinite(l));
  EXPECT_LT(e.final_loss, e.loss_trace.front());
  EXPECT_NEAR(e.final_loss, combined(render_aligned(e, cloud, cfg.render), query, cfg.loss).value, 1e-12);
  const Mat3 r = e.effective_pose.topLeftCorner<3, 3>();
  EXPECT_LT((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-9);

  const double refined = psnr(render_aligned(e, cloud, cfg.render), query);
  EXPECT_GT(refined, psnr(render(cloud, coarse, {}), query));
  PoseEstimate wrong = e;
  wrong.transform = ScrewTransform{random_unit_vector(rng), Vec3::Zero(), std::numbers::pi / 2};
  EXPECT_LT(psnr(render_aligned(wrong, cloud, cfg.render), query), refined);
}

TEST_F(RefineTest, ConvergesFromTenDegreesWithLargerStep) {
  Rng rng(9);
  const Camera coarse = perturbed(truth, rng, 10.0 * std::numbers::pi / 180.0, 0.05 * cloud.scene_radius);
  RefineConfig cfg;
  cfg.adam.lr = 1e-2;
  const PoseEstimate e = refine_pose(query, coarse, cloud, cfg);
  const PoseError err = camera_pose_error(e.effective_camera(), truth);
  EXPECT_LT(err.rotation, 0.01);
  EXPECT_LT(err.translation, 0.01 * cloud.scene_radius);
  EXPECT_GE(psnr(render_aligned(e, cloud, cfg.render), query), 25.0);
}

TEST_F(RefineTest, ResumingMatchesSingleRun) {
  Rng rng(7);
  const Camera coarse = perturbed(truth, rng, 0.05, 0.05);
  RefineConfig cfg;
  cfg.k = 30;
  const PoseEstimate full = refine_pose(query, coarse, cloud, cfg);
  cfg.k = 12;
  const PoseEstimate first = refine_pose(query, coarse, cloud, cfg);
  cfg.k = 18;
  const PoseEstimate second = refine_pose(query, coarse, cloud, cfg, &first);
  EXPECT_EQ(second.steps, 30);
  EXPECT_EQ(second.loss_trace, full.loss_trace);
  EXPECT_EQ(second.transform.to_params(), full.transform.to_params());
  EXPECT_EQ(second.current.to_params(), full.current.to_params());
  EXPECT_EQ(second.final_loss, full.final_loss);
  EXPECT_EQ(second.effective_pose, full.effective_pose);
}

TEST_F(RefineTest, InputCloudUntouched) {
  const GaussianCloud copy = cloud;
  Rng rng(8);
  RefineConfig cfg;
  cfg.k = 5;
  refine_pose(query, perturbed(truth, rng, 0.1, 0.1), cloud, cfg);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    ASSERT_EQ(cloud.splats[i].mean, copy.splats[i].mean);
    ASSERT_EQ(cloud.splats[i].rotation, copy.splats[i].rotation);
  }
}

TEST_F(RefineTest, IdentityAlignedRenderEqualsPlainRender) {
  PoseEstimate e;
  e.camera = truth;
  EXPECT_EQ(render_aligned(e, cloud, {}).data, render(cloud, truth, {}).data);
}

TEST_F(RefineTest, NonFiniteQueryDegrades) {
  ImageBuffer bad = query;
  bad.data[5] = std::numeric_limits<double>::quiet_NaN();
  RefineConfig cfg;
  cfg.k = 10;
  const PoseEstimate e = refine_pose(bad, truth, cloud, cfg);
  EXPECT_TRUE(e.degraded);
  EXPECT_FALSE(e.diagnostic.empty());
  EXPECT_EQ(to_matrix(e.transform), Mat4::Identity());
}

TEST_F(RefineTest, EarlyStopOnPlateau) {
  RefineConfig cfg;
  cfg.k = 200;
  cfg.early_stop = true;
  cfg.plateau_window = 10;
  const PoseEstimate e = refine_pose(query, truth, cloud, cfg);
  EXPECT_EQ(e.steps, 11);
}

TEST_F(RefineTest, Errors) {
  RefineConfig cfg;
  cfg.k = -1;
  EXPECT_THROW(refine_pose(query, truth, cloud, cfg), Error);
  cfg.k = 3;
  EXPECT_THROW(refine_pose(ImageBuffer(10, 10), truth, cloud, cfg), Error);
  try {
    refine_pose(query, truth, GaussianCloud{}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCloud);
  }
}
