#pragma once

#include <array>
#include <span>

#include "gspose/scene.hpp"
#include "gspose/types.hpp"

namespace gspose {

/// Screw-axis parametrization of a rigid motion: T = exp([S] theta) with
/// S = (omega, v). omega is not constrained; the exponential map uses
/// omega/|omega| with the effective angle theta*|omega|, which makes T the
/// exact matrix exponential of the 4x4 twist theta*[omega, v] for any omega.
struct ScrewTransform {
  Vec3 omega = Vec3::UnitZ();
  Vec3 v = Vec3::Zero();
  double theta = 0.0;

  static ScrewTransform identity() { return {}; }

  /// Packs (omega, v, theta) in that order.
  std::array<double, 7> to_params() const;
  static ScrewTransform from_params(std::span<const double> p);

  /// Rotation vector theta*omega and translational twist theta*v.
  Vec3 rotation_vector() const { return theta * omega; }
  Vec3 translation_twist() const { return theta * v; }
};

struct ScrewGradient {
  Vec3 omega = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double theta = 0.0;

  std::array<double, 7> to_params() const;
};

/// [w] such that [w] x = w × x.
Mat3 skew(const Vec3& w);

/// exp([omega] theta). omega is normalized internally and |omega| folded into
/// the angle. A degenerate axis (|omega| < 1e-12) yields the identity unless
/// `strict` is set and theta != 0, in which case DegenerateAxis is thrown.
Mat3 rodrigues(const Vec3& omega, double theta, bool strict = false);

/// G(theta) = I theta + (1 - cos theta)[w] + (theta - sin theta)[w]^2 for a
/// unit axis w.
Mat3 screw_g(const Vec3& unit_omega, double theta);

Mat4 to_matrix(const ScrewTransform& t);

Mat4 rigid_inverse(const Mat4& m);

/// Applies T to every mean (mu <- R mu + t) and pre-multiplies every splat
/// rotation by quat(R). Scales, opacities and colors are unchanged.
GaussianCloud apply_to_cloud(const ScrewTransform& t, const GaussianCloud& cloud);
void apply_to_cloud(const ScrewTransform& t, const GaussianCloud& cloud, GaussianCloud& out);

/// Loss gradients with respect to the transformed means and stored
/// (transformed) quaternions, one entry per splat.
struct TransformedCloudGradient {
  std::span<const Vec3> means;
  std::span<const Quat> rotations;
};

/// Chains per-splat gradients of the transformed cloud back to the seven
/// screw parameters. `source` is the cloud before the transform.
ScrewGradient pose_jacobian(const ScrewTransform& t, const GaussianCloud& source,
                            const TransformedCloudGradient& upstream);

namespace detail {

/// Coefficient functions of the SO(3)/SE(3) exponential in phi = |r|, with
/// their derivatives divided by phi. Evaluated by series near zero.
struct ExpCoefficients {
  double a, b, c;     // sin(p)/p, (1-cos p)/p^2, (p-sin p)/p^3
  double da, db, dc;  // (d/dp)/p of the above
  double d, dd;       // sin(p/2)/p and (d/dp)/p
  double half_cos;    // cos(p/2)
};

ExpCoefficients exp_coefficients(double phi);

}  // namespace detail

}  // namespace gspose
