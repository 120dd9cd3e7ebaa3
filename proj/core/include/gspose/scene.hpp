#pragma once

#include <cstddef>
#include <vector>

#include "gspose/types.hpp"

namespace gspose {

/// One anisotropic 3D Gaussian. Scale lives in log-space and opacity in
/// logit-space so unconstrained gradient steps stay in the valid domain.
/// Color is the view-independent (degree-0) RGB term.
struct Gaussian3D {
  Vec3 mean = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Quat rotation = identity_quat();
  double opacity_logit = 0.0;
  Vec3 color = Vec3::Constant(0.5);

  double opacity() const;
  Vec3 scale() const;
};

struct GaussianCloud {
  std::vector<Gaussian3D> splats;
  double scene_radius = 1.0;

  std::size_t size() const { return splats.size(); }
  bool empty() const { return splats.empty(); }

  Vec3 centroid() const;
  /// Sets scene_radius to the bounding-sphere radius around the centroid
  /// (at least `min_radius`).
  void recompute_radius(double min_radius = 1e-6);
  void normalize_rotations();
};

/// Pinhole camera. `rotation`/`translation` map world points into the
/// camera frame (x right, y down, z forward).
struct Camera {
  int width = 0;
  int height = 0;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double near = 0.01;
  double far = 100.0;

  Mat4 world_to_camera() const;
  void set_world_to_camera(const Mat4& m);
  Vec3 center() const { return -rotation.transpose() * translation; }
  /// Throws InvalidArgument when intrinsics, clip planes, or the rotation
  /// block are invalid.
  void validate() const;

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                        int height, double fov_x);
};

double sigmoid(double x);
double logit(double p);

Quat normalized(const Quat& q);
/// Rotation matrix of q / |q|.
Mat3 quat_to_matrix(const Quat& q);
Quat matrix_to_quat(const Mat3& r);
/// Hamilton product a ⊗ b.
Quat quat_multiply(const Quat& a, const Quat& b);

Mat3 covariance(const Gaussian3D& g);

enum class ProjectStatus { Ok, CulledBehindCamera, CulledBeyondFar };

struct ProjectedGaussian {
  ProjectStatus status = ProjectStatus::Ok;
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  double depth = 0.0;
  // Intermediates reused by the backward pass.
  Vec3 cam_point = Vec3::Zero();
  Mat23 jacobian = Mat23::Zero();
  Mat3 cov3d = Mat3::Identity();

  bool visible() const { return status == ProjectStatus::Ok; }
};

inline constexpr double kDefaultLowPass = 0.3;

/// EWA projection of a splat. Splats at or in front of the near plane
/// (z <= near) come back as CulledBehindCamera; z >= far as CulledBeyondFar.
ProjectedGaussian project_gaussian(const Gaussian3D& g, const Camera& cam,
                                   double low_pass = kDefaultLowPass);

}  // namespace gspose
