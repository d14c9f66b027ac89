#include "sgraph/manifold.hpp"

#include <cmath>
#include <numbers>

#include "sgraph/error.hpp"

namespace sgraph {

namespace {

// Below this angle the trigonometric coefficients are evaluated from their
// Taylor series; the closed forms lose too many digits to cancellation.
constexpr double kSeriesAngle = 0.1;

Eigen::Quaterniond normalized(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond out = q;
  out.normalize();
  return out;
}

}  // namespace

Pose3::Pose3(const Eigen::Quaterniond& q, const Vec3& t) : q_(normalized(q)), t_(t) {}

Pose3::Pose3(const Mat3& r, const Vec3& t) : q_(normalized(Eigen::Quaterniond(r))), t_(t) {}

Pose3 Pose3::from_raw(const Eigen::Quaterniond& q, const Vec3& t) {
  if (std::abs(q.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "quaternion is not unit norm");
  }
  Pose3 p;
  p.q_ = q;
  p.t_ = t;
  return p;
}

Pose3 Pose3::inverse() const {
  const Eigen::Quaterniond qi = q_.conjugate();
  return Pose3(qi, -(qi * t_));
}

Eigen::Matrix4d Pose3::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = t_;
  return m;
}

Pose3 Pose3::operator*(const Pose3& other) const {
  return Pose3(q_ * other.q_, q_ * other.t_ + t_);
}

Pose3 compose(const Pose3& a, const Pose3& b) { return a * b; }

Pose3 between(const Pose3& a, const Pose3& b) {
  const Eigen::Quaterniond qi = a.rotation().conjugate();
  return Pose3(qi * b.rotation(), qi * (b.translation() - a.translation()));
}

namespace so3 {

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Quaterniond exp_quat(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < 1e-10) {
    return normalized(Eigen::Quaterniond(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z()));
  }
  const double half = 0.5 * theta;
  const Vec3 v = std::sin(half) / theta * omega;
  return normalized(Eigen::Quaterniond(std::cos(half), v.x(), v.y(), v.z()));
}

Mat3 exp(const Vec3& omega) { return exp_quat(omega).toRotationMatrix(); }

Vec3 log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in;
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Vec3 v = q.vec();
  const double s = v.norm();
  const double w = q.w();
  double factor;
  if (s < 1e-10) {
    factor = 2.0 / w * (1.0 - s * s / (3.0 * w * w));
  } else {
    factor = 2.0 * std::atan2(s, w) / s;
  }
  return factor * v;
}

Mat3 left_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  double a;
  double b;
  if (theta < kSeriesAngle) {
    const double t2 = theta * theta;
    a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    b = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  } else {
    a = (1.0 - std::cos(theta)) / (theta * theta);
    b = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  return Mat3::Identity() + a * w + b * w * w;
}

Mat3 left_jacobian_inverse(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  double e;
  if (theta < kSeriesAngle) {
    const double t2 = theta * theta;
    e = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    e = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Mat3::Identity() - 0.5 * w + e * w * w;
}

Mat3 right_jacobian(const Vec3& omega) { return left_jacobian(-omega); }

Mat3 right_jacobian_inverse(const Vec3& omega) { return left_jacobian_inverse(-omega); }

}  // namespace so3

Tangent6 log(const Pose3& p) {
  Eigen::Quaterniond q = p.rotation();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const double angle = 2.0 * std::atan2(q.vec().norm(), q.w());
  if (angle >= std::numbers::pi - 1e-9) {
    throw Error(ErrorCode::DegenerateRotation, "rotation angle is not below pi");
  }
  const Vec3 omega = so3::log(q);
  Tangent6 out;
  out.head<3>() = omega;
  out.tail<3>() = so3::left_jacobian_inverse(omega) * p.translation();
  return out;
}

Pose3 exp(const Tangent6& t) {
  const Vec3 omega = t.head<3>();
  return Pose3(so3::exp_quat(omega), so3::left_jacobian(omega) * t.tail<3>());
}

double tangent_distance(const Pose3& a, const Pose3& b) {
  const double angle = a.rotation().angularDistance(b.rotation());
  const double dt = (a.translation() - b.translation()).norm();
  return std::sqrt(angle * angle + dt * dt);
}

namespace se3 {

namespace {

// Coupling block of the SE(3) left Jacobian for rotation `phi` and
// translation `rho`.
Mat3 coupling(const Vec3& rho, const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 p = so3::hat(phi);
  const Mat3 r = so3::hat(rho);
  double c1;
  double c2;
  double c3;
  if (theta < kSeriesAngle) {
    const double t2 = theta * theta;
    const double t4 = t2 * t2;
    c1 = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0;
    c2 = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0;
  } else {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double t2 = theta * theta;
    c1 = (theta - s) / (t2 * theta);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t2 * theta);
  }
  const Mat3 pr = p * r;
  const Mat3 rp = r * p;
  const Mat3 prp = pr * p;
  return 0.5 * r + c1 * (pr + rp + prp) + c2 * (p * pr + rp * p - 3.0 * prp) +
         c3 * (prp * p + p * prp);
}

}  // namespace

Mat6 adjoint(const Pose3& p) {
  const Mat3 r = p.rotation_matrix();
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = r;
  ad.bottomRightCorner<3, 3>() = r;
  ad.bottomLeftCorner<3, 3>() = so3::hat(p.translation()) * r;
  return ad;
}

Mat6 left_jacobian(const Tangent6& xi) {
  const Vec3 omega = xi.head<3>();
  const Mat3 jl = so3::left_jacobian(omega);
  Mat6 j = Mat6::Zero();
  j.topLeftCorner<3, 3>() = jl;
  j.bottomRightCorner<3, 3>() = jl;
  j.bottomLeftCorner<3, 3>() = coupling(xi.tail<3>(), omega);
  return j;
}

Mat6 right_jacobian(const Tangent6& xi) { return left_jacobian(-xi); }

Mat6 right_jacobian_inverse(const Tangent6& xi) {
  const Vec3 omega = -xi.head<3>();
  const Mat3 inv = so3::left_jacobian_inverse(omega);
  const Mat3 q = coupling(-xi.tail<3>(), omega);
  Mat6 j = Mat6::Zero();
  j.topLeftCorner<3, 3>() = inv;
  j.bottomRightCorner<3, 3>() = inv;
  j.bottomLeftCorner<3, 3>() = -inv * q * inv;
  return j;
}

}  // namespace se3

PlaneParams::PlaneParams(const Vec3& n, double d) {
  const double norm = n.norm();
  if (!(norm > 0.0)) throw Error(ErrorCode::InvalidArgument, "plane normal has zero length");
  normal = n / norm;
  distance = d / norm;
}

PlaneParams PlaneParams::from_raw(const Vec3& n, double d) {
  if (std::abs(n.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "plane normal is not unit length");
  }
  PlaneParams p;
  p.normal = n;
  p.distance = d;
  return p;
}

PlaneParams transform_plane(const Pose3& pose, const PlaneParams& plane_world) {
  PlaneParams out;
  out.normal = (pose.rotation().conjugate() * plane_world.normal).normalized();
  out.distance = plane_world.distance - plane_world.normal.dot(pose.translation());
  return out;
}

Mat32 plane_tangent_basis(const Vec3& n) {
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(n[i]) < std::abs(n[axis])) axis = i;
  }
  const Vec3 b1 = n.cross(Vec3::Unit(axis)).normalized();
  const Vec3 b2 = n.cross(b1);
  Mat32 basis;
  basis.col(0) = b1;
  basis.col(1) = b2;
  return basis;
}

PlaneParams plane_retract(const PlaneParams& plane, const Vec3& delta) {
  const Vec3 rot = plane_tangent_basis(plane.normal) * delta.head<2>();
  PlaneParams out;
  out.normal = (so3::exp_quat(rot) * plane.normal).normalized();
  out.distance = plane.distance + delta.z();
  return out;
}

namespace {

struct NormalErrorTerms {
  Vec3 u;
  double s;
  double c;
  double theta;
  double f;
};

NormalErrorTerms normal_error_terms(const Vec3& predicted, const Vec3& observed) {
  NormalErrorTerms t;
  t.u = observed.cross(predicted);
  t.s = t.u.norm();
  t.c = observed.dot(predicted);
  t.theta = std::atan2(t.s, t.c);
  // atan2(s, c) / s, continuous at s = 0
  t.f = t.s < 1e-12 ? 1.0 / t.c : t.theta / t.s;
  return t;
}

}  // namespace

Vec3 plane_error(const PlaneParams& predicted, const PlaneParams& observed) {
  const NormalErrorTerms t = normal_error_terms(predicted.normal, observed.normal);
  const Vec3 v = t.f * t.u;
  const Mat32 basis = plane_tangent_basis(observed.normal);
  Vec3 r;
  r.head<2>() = basis.transpose() * v;
  r.z() = predicted.distance - observed.distance;
  return r;
}

Mat3 plane_error_normal_jacobian(const Vec3& predicted_normal, const PlaneParams& observed) {
  const Vec3& m = observed.normal;
  const NormalErrorTerms t = normal_error_terms(predicted_normal, m);
  const Mat3 m_hat = so3::hat(m);
  Mat3 dv = t.f * m_hat;
  if (t.s >= 1e-12) {
    const double rr = t.s * t.s + t.c * t.c;
    const double f_s = (t.c / rr * t.s - t.theta) / (t.s * t.s);
    const double f_c = -1.0 / rr;
    const Eigen::RowVector3d ds = (t.u.transpose() * m_hat) / t.s;
    const Eigen::RowVector3d dc = m.transpose();
    dv += t.u * (f_s * ds + f_c * dc);
  }
  Mat3 j = Mat3::Zero();
  j.topRows<2>() = plane_tangent_basis(m).transpose() * dv;
  return j;
}

}  // namespace sgraph
