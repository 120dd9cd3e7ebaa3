#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gspose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Quaternions are stored as (w, x, y, z) in a plain 4-vector so that
/// optimizers can treat them as unconstrained parameters.
using Quat = Eigen::Vector4d;

inline Quat identity_quat() { return Quat(1.0, 0.0, 0.0, 0.0); }

}  // namespace gspose
