#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gspose/fit.hpp"
#include "gspose/image.hpp"
#include "gspose/render.hpp"
#include "gspose/scene.hpp"

namespace gspose {

enum class ViewMode { UniformSphere, Orbit };
enum class AnomalyKind { MissingCluster, RecolorCluster, ExtraCluster };

std::string to_string(ViewMode m);
std::string to_string(AnomalyKind k);
ViewMode parse_view_mode(const std::string& s);
AnomalyKind parse_anomaly_kind(const std::string& s);

/// `size` is the number of splats around the seed that the anomaly touches.
/// `strength` is the recolor blend weight, or the outward offset of an extra
/// cluster as a fraction of the object radius. Unused for missing clusters.
struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::MissingCluster;
  int size_min = 8;
  int size_max = 16;
  double strength_min = 0.6;
  double strength_max = 1.0;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  int n_primitives = 6;
  int splats_per_primitive = 40;
  double object_radius = 1.0;
  int n_train_views = 210;
  int n_test_normal = 20;
  int n_test_anomalous = 20;
  ViewMode train_mode = ViewMode::UniformSphere;
  ViewMode test_mode = ViewMode::UniformSphere;
  double camera_distance = 4.0;
  double fov_x = 0.8;
  /// Elevation band of orbit views, radians above the equator.
  double orbit_elevation_min = 0.2;
  double orbit_elevation_max = 0.9;
  std::vector<AnomalySpec> anomalies = default_anomalies();
  int width = 400;
  int height = 400;
  double sparsity = 1.0;
  Vec3 background = Vec3::Zero();
  /// Anomalies covering fewer pixels than this fraction of the image are
  /// re-seeded.
  double min_mask_fraction = 0.002;
  /// Noisy surface samples emitted as an initialization point set.
  int init_points = 2000;

  static std::vector<AnomalySpec> default_anomalies();
  void validate() const;
};

struct TestView {
  View view;
  BinaryMask mask;
  bool anomalous = false;
  AnomalyKind kind = AnomalyKind::MissingCluster;
  std::size_t seed_splat = 0;
  int cluster_size = 0;
  double strength = 0.0;
};

struct SynthScene {
  GaussianCloud cloud_gt;
  std::vector<View> train;
  std::vector<TestView> test_normal;
  std::vector<TestView> test_anomalous;
  std::vector<Vec3> init_points;
  std::vector<Vec3> init_colors;
  RenderConfig render;
};

/// Cameras looking at the origin from `count` directions.
std::vector<Camera> sample_cameras(std::uint64_t seed, int count, ViewMode mode, const SynthConfig& cfg);

/// Procedural object: clusters of splats (blobs and boxes), each with its
/// own base color.
GaussianCloud generate_object(const SynthConfig& cfg, std::uint64_t seed);

/// Mutates `cloud` around `seed_splat`. Returns the indices in the original
/// cloud that were affected.
std::vector<std::size_t> apply_anomaly(GaussianCloud& cloud, AnomalyKind kind, std::size_t seed_splat, int size,
                                       double strength, std::uint64_t rng_seed);

/// Pixels where any channel differs by more than `threshold`, closed 3x3.
BinaryMask difference_mask(const ImageBuffer& a, const ImageBuffer& b, double threshold = 1e-3);

SynthScene generate_scene(const SynthConfig& cfg);

/// round(fraction * n) views (at least one) at indices floor(i * n / k).
std::vector<View> sparsify(const std::vector<View>& views, double fraction);
std::vector<std::size_t> sparsify_indices(std::size_t n, double fraction);

}  // namespace gspose
