#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gspose/image.hpp"
#include "gspose/scene.hpp"

namespace gspose {

/// Mann-Whitney statistic: fraction of (positive, negative) pairs ordered
/// correctly, ties counted as one half. Throws SingleClass.
double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Pixel-level AUROC over all maps and masks jointly.
double pixel_auroc(const std::vector<ScalarMap>& maps, const std::vector<BinaryMask>& masks);

/// 8-connected components of a mask; 0 is background, labels start at 1.
std::vector<int> connected_components(const BinaryMask& mask, int* count = nullptr);

struct ProCurvePoint {
  double fpr = 0.0;
  double pro = 0.0;
};

/// Per-region overlap against false-positive rate at every distinct score
/// (a pixel is positive when its score is >= the threshold), starting from
/// (0, 0).
std::vector<ProCurvePoint> pro_curve(const std::vector<ScalarMap>& maps, const std::vector<BinaryMask>& masks);

/// Area under the PRO curve up to `fpr_limit` (trapezoids, linear
/// interpolation at the limit), divided by the limit. Throws
/// NoAnomalousPixels when no mask has a positive pixel.
double aupro(const std::vector<ScalarMap>& maps, const std::vector<BinaryMask>& masks, double fpr_limit = 0.3);

/// Trapezoidal area of a monotone curve up to x_limit, normalized by it.
double integrate_to_limit(const std::vector<ProCurvePoint>& curve, double x_limit);

/// 2 arccos(|q1 . q2|) for normalized q1, q2, evaluated in a form that
/// stays accurate for nearby rotations.
double rotation_error(const Quat& q1, const Quat& q2);
double translation_error(const Vec3& p1, const Vec3& p2);

struct PoseError {
  double rotation = 0.0;     // radians
  double translation = 0.0;  // distance between camera centers
};
PoseError camera_pose_error(const Camera& estimate, const Camera& truth);

struct CategoryReport {
  std::string name;
  std::size_t images = 0;
  double image_auroc = 0.0;
  double pixel_auroc = 0.0;
  double aupro = 0.0;
  double rotation_error_mean = 0.0;
  double translation_error_mean = 0.0;
};

struct EvalReport {
  double image_auroc = 0.0;
  double pixel_auroc = 0.0;
  double aupro = 0.0;
  double rotation_error_mean = 0.0;
  double translation_error_mean = 0.0;
  std::vector<CategoryReport> categories;
};

/// Scored images of one category.
struct EvalInput {
  std::string category;
  std::vector<double> image_scores;
  std::vector<std::uint8_t> image_labels;
  std::vector<ScalarMap> maps;
  std::vector<BinaryMask> masks;
  std::vector<PoseError> pose_errors;
};

CategoryReport evaluate_category(const EvalInput& input, double fpr_limit = 0.3);
/// Per-category reports; the overall numbers are category means.
EvalReport evaluate(const std::vector<EvalInput>& inputs, double fpr_limit = 0.3);

std::string format_table(const EvalReport& report);

}  // namespace gspose
