#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sgraph {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat32 = Eigen::Matrix<double, 3, 2>;

/// Tangent-space coordinates of SE(3): rotational part first, then translational.
using Tangent6 = Vec6;

/// Rigid-body transform. The quaternion is kept unit-norm by every constructor
/// and operation that produces a new pose.
class Pose3 {
 public:
  Pose3() : q_(Eigen::Quaterniond::Identity()), t_(Vec3::Zero()) {}
  Pose3(const Eigen::Quaterniond& q, const Vec3& t);
  Pose3(const Mat3& r, const Vec3& t);

  /// Takes the quaternion as given (no renormalization) so serialized poses
  /// round-trip bit-exactly. Throws InvalidArgument if |q| deviates from 1 by
  /// more than 1e-9.
  static Pose3 from_raw(const Eigen::Quaterniond& q, const Vec3& t);

  static Pose3 identity() { return {}; }

  const Eigen::Quaterniond& rotation() const { return q_; }
  Mat3 rotation_matrix() const { return q_.toRotationMatrix(); }
  const Vec3& translation() const { return t_; }

  Pose3 inverse() const;
  Vec3 transform(const Vec3& p) const { return q_ * p + t_; }
  Vec3 inverse_transform(const Vec3& p) const { return q_.conjugate() * (p - t_); }
  Eigen::Matrix4d matrix() const;

  Pose3 operator*(const Pose3& other) const;

 private:
  Eigen::Quaterniond q_;
  Vec3 t_;
};

Pose3 compose(const Pose3& a, const Pose3& b);
/// a⁻¹·b, the pose of b expressed in the frame of a.
Pose3 between(const Pose3& a, const Pose3& b);

/// Throws DegenerateRotation when the rotation angle is not below pi.
Tangent6 log(const Pose3& p);
Pose3 exp(const Tangent6& t);

/// Angular distance between two poses plus translation norm, used as a
/// tangent-norm distance in tests and convergence checks.
double tangent_distance(const Pose3& a, const Pose3& b);

namespace so3 {
Mat3 hat(const Vec3& v);
Mat3 exp(const Vec3& omega);
Eigen::Quaterniond exp_quat(const Vec3& omega);
Vec3 log(const Eigen::Quaterniond& q);
Mat3 left_jacobian(const Vec3& omega);
Mat3 left_jacobian_inverse(const Vec3& omega);
Mat3 right_jacobian(const Vec3& omega);
Mat3 right_jacobian_inverse(const Vec3& omega);
}  // namespace so3

namespace se3 {
/// Adjoint in (rotation, translation) ordering: exp(Ad·ξ) = T·exp(ξ)·T⁻¹.
Mat6 adjoint(const Pose3& p);
Mat6 left_jacobian(const Tangent6& xi);
Mat6 right_jacobian(const Tangent6& xi);
Mat6 right_jacobian_inverse(const Tangent6& xi);
}  // namespace se3

/// Infinite plane {x : n·x = d} in Hesse normal form.
struct PlaneParams {
  Vec3 normal = Vec3::UnitZ();
  double distance = 0.0;

  PlaneParams() = default;
  /// Normalizes the normal and scales the distance with it.
  PlaneParams(const Vec3& n, double d);

  /// No renormalization; for deserialization. Throws InvalidArgument if |n|
  /// deviates from 1 by more than 1e-9.
  static PlaneParams from_raw(const Vec3& n, double d);

  /// Closest point of the plane to the origin, n·d.
  Vec3 anchor() const { return normal * distance; }
  double signed_distance(const Vec3& x) const { return normal.dot(x) - distance; }
};

/// Expresses a world-frame plane in the frame of `pose`: for every x on the
/// plane, pose⁻¹(x) lies on the result.
PlaneParams transform_plane(const Pose3& pose, const PlaneParams& plane_world);

/// Two unit vectors spanning the tangent space of the unit sphere at n.
/// Deterministic in n.
Mat32 plane_tangent_basis(const Vec3& n);

/// Moves a plane along its 3 minimal coordinates: the normal rotates by
/// basis·delta[0:2], the distance shifts by delta[2].
PlaneParams plane_retract(const PlaneParams& plane, const Vec3& delta);

/// Minimal 3-vector difference between a predicted and an observed plane:
/// the rotation vector carrying the observed normal onto the predicted one,
/// projected on the observed normal's tangent basis, followed by the
/// distance difference.
Vec3 plane_error(const PlaneParams& predicted, const PlaneParams& observed);

/// Derivative of plane_error with respect to the predicted normal (3x3 block
/// acting on a free 3-vector) for a fixed observation.
Mat3 plane_error_normal_jacobian(const Vec3& predicted_normal, const PlaneParams& observed);

}  // namespace sgraph
