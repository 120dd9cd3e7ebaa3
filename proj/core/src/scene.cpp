#include "gspose/scene.hpp"

#include <algorithm>
#include <cmath>

#include "gspose/error.hpp"

namespace gspose {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double Gaussian3D::opacity() const { return sigmoid(opacity_logit); }

Vec3 Gaussian3D::scale() const { return log_scale.array().exp().matrix(); }

Vec3 GaussianCloud::centroid() const {
  Vec3 c = Vec3::Zero();
  if (splats.empty()) return c;
  for (const auto& s : splats) c += s.mean;
  return c / static_cast<double>(splats.size());
}

void GaussianCloud::recompute_radius(double min_radius) {
  const Vec3 c = centroid();
  double r = 0.0;
  for (const auto& s : splats) r = std::max(r, (s.mean - c).norm());
  scene_radius = std::max(r, min_radius);
}

void GaussianCloud::normalize_rotations() {
  for (auto& s : splats) s.rotation = normalized(s.rotation);
}

Mat4 Camera::world_to_camera() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

void Camera::set_world_to_camera(const Mat4& m) {
  rotation = m.topLeftCorner<3, 3>();
  translation = m.topRightCorner<3, 1>();
}

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "camera size must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  if (!(near > 0.0) || !(near < far)) throw Error(ErrorCode::InvalidArgument, "require 0 < near < far");
  const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "camera rotation is not in SO(3)");
  }
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                       double fov_x) {
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = 0.5 * width / std::tan(0.5 * fov_x);
  cam.fy = cam.fx;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;

  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) {
    // Looking along the up vector; any perpendicular works.
    right = forward.cross(std::abs(forward.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY());
  }
  right.normalize();
  const Vec3 down = forward.cross(right);
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * eye;
  return cam;
}

Quat normalized(const Quat& q) {
  const double n = q.norm();
  if (n == 0.0) return identity_quat();
  return q / n;
}

Mat3 quat_to_matrix(const Quat& qin) {
  const Quat q = normalized(qin);
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Quat matrix_to_quat(const Mat3& r) {
  const Eigen::Quaterniond q(r);
  Quat out(q.w(), q.x(), q.y(), q.z());
  if (out[0] < 0.0) out = -out;
  return normalized(out);
}

Quat quat_multiply(const Quat& a, const Quat& b) {
  return Quat(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

Mat3 covariance(const Gaussian3D& g) {
  const Mat3 m = quat_to_matrix(g.rotation) * g.scale().asDiagonal();
  Mat3 c = m * m.transpose();
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) c(j, i) = c(i, j);
  return c;
}

ProjectedGaussian project_gaussian(const Gaussian3D& g, const Camera& cam, double low_pass) {
  ProjectedGaussian p;
  p.cam_point = cam.rotation * g.mean + cam.translation;
  const double x = p.cam_point.x(), y = p.cam_point.y(), z = p.cam_point.z();
  p.depth = z;
  if (z <= cam.near) {
    p.status = ProjectStatus::CulledBehindCamera;
    return p;
  }
  if (z >= cam.far) {
    p.status = ProjectStatus::CulledBeyondFar;
    return p;
  }
  const double inv_z = 1.0 / z;
  p.mean2d = Vec2(cam.fx * x * inv_z + cam.cx, cam.fy * y * inv_z + cam.cy);
  p.jacobian << cam.fx * inv_z, 0.0, -cam.fx * x * inv_z * inv_z,
                0.0, cam.fy * inv_z, -cam.fy * y * inv_z * inv_z;
  p.cov3d = covariance(g);
  const Mat23 jw = p.jacobian * cam.rotation;
  p.cov2d = jw * p.cov3d * jw.transpose();
  p.cov2d(0, 1) = p.cov2d(1, 0) = 0.5 * (p.cov2d(0, 1) + p.cov2d(1, 0));
  p.cov2d(0, 0) += low_pass;
  p.cov2d(1, 1) += low_pass;
  return p;
}

}  // namespace gspose
