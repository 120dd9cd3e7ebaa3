#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "gspose/fit.hpp"
#include "gspose/loss.hpp"
#include "gspose/optim.hpp"
#include "gspose/render.hpp"
#include "gspose/se3.hpp"

namespace gspose {

/// Scores a query against every training view; higher is a better match.
class CoarseMatcher {
 public:
  virtual ~CoarseMatcher() = default;
  virtual void prepare(const std::vector<View>& train) = 0;
  virtual std::vector<double> scores(const ImageBuffer& query) const = 0;
};

/// Normalized cross-correlation of blurred grayscale thumbnails.
class NccMatcher : public CoarseMatcher {
 public:
  explicit NccMatcher(int size = 64, double blur_sigma = 1.0) : size_(size), sigma_(blur_sigma) {}

  void prepare(const std::vector<View>& train) override;
  std::vector<double> scores(const ImageBuffer& query) const override;

  /// Zero-mean, unit-norm thumbnail. Constant images give all zeros.
  std::vector<double> descriptor(const ImageBuffer& img) const;

 private:
  int size_;
  double sigma_;
  std::vector<std::vector<double>> train_;
};

struct CoarsePose {
  std::size_t index = 0;
  Camera camera;
  std::vector<double> scores;
};

/// Camera of the best-scoring training view; ties go to the lowest index.
CoarsePose coarse_pose(const ImageBuffer& query, const std::vector<View>& train,
                       const CoarseMatcher& matcher);
/// Convenience overload with a freshly prepared NccMatcher.
CoarsePose coarse_pose(const ImageBuffer& query, const std::vector<View>& train);

struct RefineConfig {
  int k = 175;
  LossConfig loss;
  AdamConfig adam;
  RenderConfig render;
  /// Stop when the loss improved by less than `plateau_tol` (relative) over
  /// the last `plateau_window` steps. Off by default.
  bool early_stop = false;
  double plateau_tol = 1e-4;
  int plateau_window = 25;

  void validate() const;
};

struct PoseEstimate {
  Camera camera;  // coarse camera, held fixed
  /// Lowest-loss transform evaluated so far.
  ScrewTransform transform;
  /// Optimizer iterate after the last step; resumption continues from here.
  ScrewTransform current;
  /// World-to-camera matrix of the equivalent camera: camera * transform.
  Mat4 effective_pose = Mat4::Identity();
  /// Loss before each update, one entry per step.
  std::vector<double> loss_trace;
  int steps = 0;
  double final_loss = 0.0;  // loss at `transform`
  bool degraded = false;
  std::string diagnostic;
  AdamState optimizer;

  Camera effective_camera() const;
};

/// k steps of Adam on the seven screw parameters against the combined
/// photometric loss. The returned transform is the lowest-loss iterate,
/// the final one included. Passing `resume` continues from an earlier
/// estimate, including its optimizer moments and loss trace. A non-finite
/// loss or gradient stops early, flagged degraded.
PoseEstimate refine_pose(const ImageBuffer& query, const Camera& coarse, const GaussianCloud& cloud,
                         const RefineConfig& cfg, const PoseEstimate* resume = nullptr);

/// Render of the transformed cloud from the fixed coarse camera.
ImageBuffer render_aligned(const PoseEstimate& estimate, const GaussianCloud& cloud,
                           const RenderConfig& cfg);

}  // namespace gspose
