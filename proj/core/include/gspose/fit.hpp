#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "gspose/image.hpp"
#include "gspose/loss.hpp"
#include "gspose/render.hpp"
#include "gspose/scene.hpp"

namespace gspose {

/// A posed image.
struct View {
  ImageBuffer image;
  Camera camera;
};

enum class FitInit { RandomInSphere, FromPoints };

struct FitConfig {
  int iterations = 3000;
  /// Mean learning rate, multiplied by the scene extent and decayed
  /// exponentially from `lr_mean` to `lr_mean_final` over the run.
  double lr_mean = 1.6e-4;
  double lr_mean_final = 1.6e-6;
  double lr_scale = 5e-3;
  double lr_rotation = 1e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;

  int densify_interval = 100;
  int densify_from = 500;
  /// Last iteration at which density control runs; negative means half the
  /// run.
  int densify_until = -1;
  /// Threshold on the view-averaged norm of the screen-space mean gradient
  /// in normalized device units.
  double densify_grad_threshold = 2e-4;
  double prune_opacity_threshold = 0.005;
  std::size_t max_splats = 50000;

  FitInit init = FitInit::RandomInSphere;
  std::size_t init_count = 1000;
  double init_radius = 1.0;
  Vec3 init_center = Vec3::Zero();
  double init_opacity = 0.1;
  /// Extent used to scale the mean learning rate; 0 derives it from the
  /// camera centers.
  double scene_extent = 0.0;
  std::uint64_t seed = 0;

  LossConfig loss;
  RenderConfig render;

  int log_interval = 100;
  int checkpoint_interval = 0;

  void validate() const;
};

struct FitLogEntry {
  int iteration = 0;
  double loss = 0.0;
  double psnr = 0.0;
  std::size_t splats = 0;
};

struct FitResult {
  GaussianCloud cloud;
  std::vector<FitLogEntry> log;
  std::vector<double> losses;  // one per iteration
};

struct FitCallbacks {
  std::function<void(const FitLogEntry&)> on_log;
  std::function<void(int iteration, const GaussianCloud&)> on_checkpoint;
};

/// Splats at `points` with scales from the mean distance to the three
/// nearest neighbours. Colors default to mid-gray when `colors` is empty.
GaussianCloud init_from_points(const std::vector<Vec3>& points, const std::vector<Vec3>& colors,
                               double opacity);
/// Uniform samples in a ball, gray, isotropic.
GaussianCloud init_random_in_sphere(std::size_t count, const Vec3& center, double radius,
                                    double opacity, std::uint64_t seed);
/// One point per `stride`-th pixel, placed at `depth` along the pixel ray
/// and colored by the pixel.
GaussianCloud backproject_view(const View& view, double depth, int stride, double opacity);

/// 1.1 x the largest distance of a camera center from their mean.
double camera_extent(const std::vector<View>& views);

/// Gradient-descent fit of a cloud to the views with Adam per parameter
/// class, pruning and splitting. `initial` overrides cfg.init when non-null.
FitResult fit_cloud(const std::vector<View>& views, const FitConfig& cfg,
                    const GaussianCloud* initial = nullptr, const FitCallbacks& callbacks = {});

/// Splits splat `i` into two children offset by half a standard deviation
/// along its dominant axis, that axis' scale divided by 1.6.
std::pair<Gaussian3D, Gaussian3D> split_splat(const Gaussian3D& g);

/// Density control step: prunes splats with opacity below the threshold and
/// splits those whose averaged gradient exceeds it, within max_splats.
/// Returns the indices of kept original splats followed by a count of
/// appended children.
struct DensifyOutcome {
  std::vector<std::size_t> kept;
  std::size_t appended = 0;
  std::size_t pruned = 0;
  std::size_t split = 0;
};
DensifyOutcome densify_and_prune(GaussianCloud& cloud, const std::vector<double>& avg_grad,
                                 const FitConfig& cfg);

}  // namespace gspose
