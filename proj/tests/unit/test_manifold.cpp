#include <doctest.h>

#include <cmath>

#include "sgraph/error.hpp"
#include "sgraph/manifold.hpp"
#include "test_util.hpp"

using namespace sgraph;
using namespace testutil;

TEST_CASE("compose matches homogeneous matrix product") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Pose3 a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    const Eigen::Matrix4d expect = homogeneous(a) * homogeneous(b);
    CHECK((homogeneous(compose(a, b)) - expect).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(pose_gap(compose(compose(a, b), c), compose(a, compose(b, c))) <= 1e-9);
    CHECK(pose_gap(compose(Pose3::identity(), a), a) <= 1e-12);
    CHECK(log(compose(a, a.inverse())).norm() <= 1e-9);
    CHECK(std::abs(compose(a, b).rotation().norm() - 1.0) <= 1e-9);
  }
}

TEST_CASE("between round trip") {
  std::mt19937_64 rng(2);
  const Pose3 p = random_pose(rng);
  CHECK(log(between(p, p)).norm() <= 1e-12);
  CHECK(pose_gap(between(Pose3::identity(), p), p) <= 1e-12);
  for (int i = 0; i < 1000; ++i) {
    const Pose3 a = random_pose(rng), b = random_pose(rng);
    CHECK(pose_gap(compose(a, between(a, b)), b) <= 1e-9);
  }
}

TEST_CASE("exp and log are mutually inverse") {
  CHECK(log(Pose3::identity()).norm() == 0.0);
  CHECK(pose_gap(exp(Tangent6::Zero()), Pose3::identity()) == 0.0);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    Tangent6 t;
    const double angle = uniform(rng, 0.0, 3.0);
    t.head<3>() = random_unit(rng) * angle;
    t.tail<3>() = random_vec(rng, 4.0);
    CHECK((log(exp(t)) - t).norm() <= 1e-9);
    const Pose3 p = random_pose(rng);
    if (std::abs(log(p).head<3>().norm() - M_PI) > 1e-6) CHECK(pose_gap(exp(log(p)), p) <= 1e-9);
  }
  // tiny angles take the series branch
  Tangent6 small;
  small << 1e-9, -2e-9, 3e-10, 0.5, -0.25, 1.0;
  CHECK((log(exp(small)) - small).norm() <= 1e-12);
}

TEST_CASE("log rejects a half-turn") {
  const Pose3 half(Eigen::Quaterniond(Eigen::AngleAxisd(M_PI, Vec3::UnitZ())), Vec3::Zero());
  CHECK_THROWS_AS(log(half), Error);
  try {
    log(half);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateRotation);
  }
}

TEST_CASE("adjoint identity") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Pose3 p = random_pose(rng);
    Tangent6 xi;
    xi.head<3>() = random_vec(rng, 0.5);
    xi.tail<3>() = random_vec(rng, 1.0);
    const Pose3 lhs = exp(Tangent6(se3::adjoint(p) * xi));
    const Pose3 rhs = compose(compose(p, exp(xi)), p.inverse());
    CHECK(pose_gap(lhs, rhs) <= 1e-9);
  }
}

TEST_CASE("se3 right jacobian matches finite differences") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    Tangent6 xi;
    xi.head<3>() = random_vec(rng, 1.0);
    xi.tail<3>() = random_vec(rng, 2.0);
    // exp(xi + d) ≈ exp(xi)·exp(Jr d)
    const Mat6 jr = se3::right_jacobian(xi);
    const double h = 1e-6;
    for (int c = 0; c < 6; ++c) {
      Tangent6 d = Tangent6::Zero();
      d[c] = h;
      const Tangent6 plus = log(between(exp(xi), exp(Tangent6(xi + d))));
      const Tangent6 minus = log(between(exp(xi), exp(Tangent6(xi - d))));
      const Tangent6 col = (plus - minus) / (2 * h);
      CHECK((col - jr.col(c)).cwiseAbs().maxCoeff() <= 1e-6);
    }
    CHECK((se3::right_jacobian_inverse(xi) * jr - Mat6::Identity()).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("plane construction and anchor") {
  const PlaneParams p(Vec3(0, 3, 4), 10.0);
  CHECK(std::abs(p.normal.norm() - 1.0) <= 1e-12);
  CHECK(p.distance == doctest::Approx(2.0));
  CHECK(p.normal.dot(p.anchor()) - p.distance == doctest::Approx(0.0));
}

TEST_CASE("transform_plane") {
  const PlaneParams pi(Vec3(1, 0, 0), 2.0);
  const PlaneParams same = transform_plane(Pose3::identity(), pi);
  CHECK(same.normal == pi.normal);
  CHECK(same.distance == pi.distance);

  const Vec3 t(0.5, -1.0, 3.0);
  const PlaneParams moved = transform_plane(Pose3(Mat3::Identity(), t), pi);
  CHECK(moved.distance == doctest::Approx(2.0 - 0.5));

  std::mt19937_64 rng(6);
  for (int i = 0; i < 1000; ++i) {
    const Pose3 pose = random_pose(rng);
    const PlaneParams plane(random_unit(rng), uniform(rng, -5, 5));
    const PlaneParams local = transform_plane(pose, plane);
    const Mat32 basis = plane_tangent_basis(plane.normal);
    for (int s = 0; s < 3; ++s) {
      const Vec3 x = plane.anchor() + basis * Eigen::Vector2d(uniform(rng, -3, 3), uniform(rng, -3, 3));
      CHECK(std::abs(local.signed_distance(pose.inverse_transform(x))) <= 1e-9);
    }
    const Pose3 other = random_pose(rng);
    const PlaneParams chained = transform_plane(other, transform_plane(pose, plane));
    const PlaneParams direct = transform_plane(compose(pose, other), plane);
    CHECK((chained.normal - direct.normal).norm() <= 1e-9);
    CHECK(std::abs(chained.distance - direct.distance) <= 1e-9);
  }
}

TEST_CASE("plane retract and error") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const PlaneParams p(random_unit(rng), uniform(rng, -5, 5));
    CHECK(plane_error(p, p).norm() <= 1e-12);
    const Vec3 delta = random_vec(rng, 0.3);
    const PlaneParams q = plane_retract(p, delta);
    CHECK(std::abs(q.normal.norm() - 1.0) <= 1e-12);
    // error of a retracted plane against its origin recovers the step
    const Vec3 e = plane_error(q, p);
    CHECK((e - delta).norm() <= 1e-9);
  }
}
