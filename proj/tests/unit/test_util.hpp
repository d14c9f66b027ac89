#pragma once

#include <cmath>
#include <random>

#include "sgraph/manifold.hpp"

namespace testutil {

using sgraph::Pose3;
using sgraph::Vec3;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale) {
  return {uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale)};
}

inline Eigen::Quaterniond random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

inline Pose3 random_pose(std::mt19937_64& rng, double trans = 5.0) {
  return Pose3(random_quat(rng), random_vec(rng, trans));
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

// 4x4 homogeneous matrix, built without going through the library.
inline Eigen::Matrix4d homogeneous(const Pose3& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = p.rotation().toRotationMatrix();
  m.topRightCorner<3, 1>() = p.translation();
  return m;
}

inline double pose_gap(const Pose3& a, const Pose3& b) {
  return (homogeneous(a) - homogeneous(b)).cwiseAbs().maxCoeff();
}

}  // namespace testutil
