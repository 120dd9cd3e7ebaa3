#include "gspose/se3.hpp"

#include <cmath>

#include "gspose/error.hpp"
#include "gspose/parallel.hpp"

namespace gspose {

std::array<double, 7> ScrewTransform::to_params() const {
  return {omega.x(), omega.y(), omega.z(), v.x(), v.y(), v.z(), theta};
}

ScrewTransform ScrewTransform::from_params(std::span<const double> p) {
  if (p.size() != 7) throw Error(ErrorCode::ShapeMismatch, "screw transform needs 7 parameters");
  ScrewTransform t;
  t.omega = Vec3(p[0], p[1], p[2]);
  t.v = Vec3(p[3], p[4], p[5]);
  t.theta = p[6];
  return t;
}

std::array<double, 7> ScrewGradient::to_params() const {
  return {omega.x(), omega.y(), omega.z(), v.x(), v.y(), v.z(), theta};
}

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Mat3 rodrigues(const Vec3& omega, double theta, bool strict) {
  const double n = omega.norm();
  if (n < 1e-12) {
    if (strict && theta != 0.0) throw Error(ErrorCode::DegenerateAxis, "|omega| < 1e-12");
    return Mat3::Identity();
  }
  const Mat3 w = skew(omega / n);
  const double phi = theta * n;
  return Mat3::Identity() + std::sin(phi) * w + (1.0 - std::cos(phi)) * w * w;
}

Mat3 screw_g(const Vec3& unit_omega, double theta) {
  const Mat3 w = skew(unit_omega);
  return Mat3::Identity() * theta + (1.0 - std::cos(theta)) * w + (theta - std::sin(theta)) * w * w;
}

namespace detail {

ExpCoefficients exp_coefficients(double phi) {
  ExpCoefficients k{};
  k.half_cos = std::cos(0.5 * phi);
  if (std::abs(phi) >= 0.5) {
    const double s = std::sin(phi), c = std::cos(phi);
    const double p2 = phi * phi, p3 = p2 * phi, p4 = p2 * p2, p5 = p4 * phi;
    k.a = s / phi;
    k.b = (1.0 - c) / p2;
    k.c = (phi - s) / p3;
    k.da = (phi * c - s) / p3;
    k.db = (phi * s - 2.0 * (1.0 - c)) / p4;
    k.dc = ((1.0 - c) * phi - 3.0 * (phi - s)) / p5;
    const double sh = std::sin(0.5 * phi);
    k.d = sh / phi;
    k.dd = (0.5 * phi * k.half_cos - sh) / p3;
    return k;
  }

  // Alternating series in s = phi^2; 10 terms are far below double eps for
  // |phi| < 0.5.
  const double s = phi * phi;
  double fact[24];
  fact[0] = 1.0;
  for (int i = 1; i < 24; ++i) fact[i] = fact[i - 1] * i;
  double sk = 1.0, skm1 = 0.0, quarter_k = 1.0, sign = 1.0;
  for (int kk = 0; kk < 10; ++kk) {
    const double two_k = 2.0 * kk;
    k.a += sign * sk / fact[2 * kk + 1];
    k.b += sign * sk / fact[2 * kk + 2];
    k.c += sign * sk / fact[2 * kk + 3];
    k.d += 0.5 * sign * sk * quarter_k / fact[2 * kk + 1];
    if (kk >= 1) {
      k.da += sign * two_k * skm1 / fact[2 * kk + 1];
      k.db += sign * two_k * skm1 / fact[2 * kk + 2];
      k.dc += sign * two_k * skm1 / fact[2 * kk + 3];
      k.dd += 0.5 * sign * two_k * skm1 * quarter_k / fact[2 * kk + 1];
    }
    skm1 = sk;
    sk *= s;
    quarter_k *= 0.25;
    sign = -sign;
  }
  return k;
}

}  // namespace detail

Mat4 to_matrix(const ScrewTransform& t) {
  const Vec3 r = t.rotation_vector();
  const Vec3 u = t.translation_twist();
  const auto k = detail::exp_coefficients(r.norm());
  const Mat3 w = skew(r);
  const Mat3 w2 = w * w;
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = Mat3::Identity() + k.a * w + k.b * w2;
  m.topRightCorner<3, 1>() = (Mat3::Identity() + k.b * w + k.c * w2) * u;
  return m;
}

Mat4 rigid_inverse(const Mat4& m) {
  Mat4 inv = Mat4::Identity();
  const Mat3 rt = m.topLeftCorner<3, 3>().transpose();
  inv.topLeftCorner<3, 3>() = rt;
  inv.topRightCorner<3, 1>() = -rt * m.topRightCorner<3, 1>();
  return inv;
}

namespace {

struct RotationParts {
  Mat3 rotation;
  Vec3 translation;
  Quat quat;
};

RotationParts decompose(const ScrewTransform& t) {
  const Vec3 r = t.rotation_vector();
  const double phi = r.norm();
  const auto k = detail::exp_coefficients(phi);
  const Mat4 m = to_matrix(t);
  RotationParts parts;
  parts.rotation = m.topLeftCorner<3, 3>();
  parts.translation = m.topRightCorner<3, 1>();
  parts.quat = Quat(k.half_cos, k.d * r.x(), k.d * r.y(), k.d * r.z());
  return parts;
}

constexpr std::size_t kBlock = 1024;

}  // namespace

void apply_to_cloud(const ScrewTransform& t, const GaussianCloud& cloud, GaussianCloud& out) {
  const RotationParts parts = decompose(t);
  out.scene_radius = cloud.scene_radius;
  out.splats.resize(cloud.splats.size());
  const std::size_t n = cloud.splats.size();
  parallel_for((n + kBlock - 1) / kBlock, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const Gaussian3D& src = cloud.splats[i];
      Gaussian3D& dst = out.splats[i];
      dst = src;
      dst.mean = parts.rotation * src.mean + parts.translation;
      dst.rotation = normalized(quat_multiply(parts.quat, src.rotation));
    }
  });
}

GaussianCloud apply_to_cloud(const ScrewTransform& t, const GaussianCloud& cloud) {
  GaussianCloud out;
  apply_to_cloud(t, cloud, out);
  return out;
}

ScrewGradient pose_jacobian(const ScrewTransform& t, const GaussianCloud& source,
                            const TransformedCloudGradient& upstream) {
  const std::size_t n = source.splats.size();
  if (upstream.means.size() != n || upstream.rotations.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "upstream gradient count does not match cloud size");
  }
  const Vec3 r = t.rotation_vector();
  const Vec3 u = t.translation_twist();
  const double phi = r.norm();
  const auto k = detail::exp_coefficients(phi);
  const Quat p(k.half_cos, k.d * r.x(), k.d * r.y(), k.d * r.z());

  // Per-block partial sums, reduced in block order for determinism.
  struct Partial {
    Mat3 grad_rot = Mat3::Zero();
    Vec3 grad_trans = Vec3::Zero();
    Vec4 grad_quat = Vec4::Zero();
  };
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<Partial> partials(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    Partial acc;
    const std::size_t end = std::min(n, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const Vec3& gm = upstream.means[i];
      acc.grad_rot += gm * source.splats[i].mean.transpose();
      acc.grad_trans += gm;

      const Quat& q = source.splats[i].rotation;
      const Quat prod = quat_multiply(p, q);
      const double norm = prod.norm();
      const Quat qn = prod / norm;
      const Quat& gq = upstream.rotations[i];
      const Quat g_prod = (gq - qn * qn.dot(gq)) / norm;
      // prod = M(q) p, so dL/dp = M(q)^T dL/dprod.
      Eigen::Matrix4d mq;
      mq << q[0], -q[1], -q[2], -q[3],
            q[1], q[0], q[3], -q[2],
            q[2], -q[3], q[0], q[1],
            q[3], q[2], -q[1], q[0];
      acc.grad_quat += mq.transpose() * g_prod;
    }
    partials[b] = acc;
  });
  Partial total;
  for (const auto& part : partials) {
    total.grad_rot += part.grad_rot;
    total.grad_trans += part.grad_trans;
    total.grad_quat += part.grad_quat;
  }

  const Mat3 w = skew(r);
  const Mat3 w2 = w * w;
  const Mat3 v_mat = Mat3::Identity() + k.b * w + k.c * w2;
  const Vec3 p_vec = total.grad_quat.tail<3>();

  Vec3 grad_r;
  for (int i = 0; i < 3; ++i) {
    const Mat3 e = skew(Vec3::Unit(i));
    const Mat3 sym = e * w + w * e;
    const Mat3 d_rot = k.a * e + k.b * sym + k.da * r[i] * w + k.db * r[i] * w2;
    const Mat3 d_v = k.b * e + k.c * sym + k.db * r[i] * w + k.dc * r[i] * w2;
    double g = (total.grad_rot.array() * d_rot.array()).sum();
    g += total.grad_trans.dot(d_v * u);
    g += total.grad_quat[0] * (-0.5 * k.d * r[i]);
    g += p_vec.dot(k.d * Vec3::Unit(i) + k.dd * r[i] * r);
    grad_r[i] = g;
  }
  const Vec3 grad_u = v_mat.transpose() * total.grad_trans;

  ScrewGradient out;
  out.omega = t.theta * grad_r;
  out.v = t.theta * grad_u;
  out.theta = t.omega.dot(grad_r) + t.v.dot(grad_u);
  return out;
}

}  // namespace gspose
