#pragma once

#include <array>
#include <string>

#include "gspose/render.hpp"
#include "gspose/se3.hpp"
#include "oracles.hpp"

namespace gspose::testing {

enum ParamClass { kMean = 0, kLogScale, kRotation, kOpacity, kColor, kParamClassCount };
const char* param_class_name(int c);

struct GradCheckResult {
  std::array<double, kParamClassCount> max_rel{};
  std::array<int, kParamClassCount> checked{};
  std::string worst;  // description of the worst entry overall
};

/// Compares render_backward against central differences of
/// L = sum of squared pixels over every parameter of every splat.
GradCheckResult check_render_gradients(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg);

struct PoseGradCheckResult {
  double max_rel = 0.0;
  std::array<double, 7> analytic{};
  std::array<double, 7> numeric{};
};

/// Same loss, rendered through apply_to_cloud(t, cloud); checks the seven
/// screw-parameter gradients from pose_jacobian.
PoseGradCheckResult check_pose_gradients(const ScrewTransform& t, const GaussianCloud& cloud, const Camera& cam,
                                         const RenderConfig& cfg, double h = 1e-6);

double sum_squares(const ImageBuffer& img);

}  // namespace gspose::testing
