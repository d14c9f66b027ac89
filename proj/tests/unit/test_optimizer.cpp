#include <doctest.h>

#include "dense_reference.hpp"
#include "sgraph/error.hpp"
#include "sgraph/optimizer.hpp"

using namespace sgraph;
using namespace fixtures;

namespace {

Factor odometry(VertexId a, VertexId b, const Pose3& m, const Eigen::MatrixXd& info) {
  Factor f;
  f.kind = FactorKind::Odometry;
  f.vertices = {a, b};
  f.measurement = m;
  f.information = info;
  return f;
}

// Straight-line SE(3) log: angle-axis for rotation, V⁻¹ for translation.
Tangent6 reference_log(const Eigen::Matrix4d& m) {
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  const Eigen::AngleAxisd aa(r);
  const Vec3 w = aa.axis() * aa.angle();
  const double th = aa.angle();
  Eigen::Matrix3d wx;
  wx << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  Eigen::Matrix3d v = Eigen::Matrix3d::Identity();
  if (th > 1e-8) v += (1 - std::cos(th)) / (th * th) * wx + (th - std::sin(th)) / (th * th * th) * wx * wx;
  Tangent6 out;
  out.head<3>() = w;
  out.tail<3>() = v.inverse() * m.topRightCorner<3, 1>();
  return out;
}

std::vector<VertexId> all_vertices(const SGraph& g) {
  std::vector<VertexId> out;
  for (const auto& [i, v] : g.keyframes()) out.push_back(v.id);
  for (const auto& [i, v] : g.walls()) out.push_back(v.id);
  for (const auto& [i, v] : g.rooms()) out.push_back(v.id);
  for (const auto& [i, v] : g.floors()) out.push_back(v.id);
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  OptimizeConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.lambda_up = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("residuals of consistent measurements vanish") {
  SGraph g;
  std::mt19937_64 rng(21);
  const Pose3 a = rand_pose(rng), b = rand_pose(rng);
  const VertexId k0 = g.add_keyframe(0, a), k1 = g.add_keyframe(1, b);
  const FactorId f = g.add_factor(odometry(k0, k1, between(a, b), Eigen::MatrixXd::Identity(6, 6)));
  CHECK(residual(g.factor(f), g).norm() <= 1e-9);

  SGraph room;
  const VertexId w0 = room.add_wall(PlaneParams(Vec3(1, 0, 0), 2));
  const VertexId w1 = room.add_wall(PlaneParams(Vec3(-1, 0, 0), 2));
  const VertexId w2 = room.add_wall(PlaneParams(Vec3(0, 1, 0), 2));
  const VertexId w3 = room.add_wall(PlaneParams(Vec3(0, -1, 0), 2));
  const VertexId r = room.add_room(Vec2::Zero(), {w0, w1, w2, w3});
  Factor rw;
  rw.kind = FactorKind::RoomWalls;
  rw.vertices = {r, w0, w1, w2, w3};
  rw.information = Eigen::MatrixXd::Identity(2, 2);
  const FactorId rf = room.add_factor(rw);
  CHECK(residual(room.factor(rf), room).norm() == 0.0);
}

TEST_CASE("residuals match an independent reimplementation") {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 200; ++i) {
    SGraph g;
    const FactorId pf = random_factor_graph(g, FactorKind::LoopClosure, rng);
    const Factor& f = g.factor(pf);
    const Eigen::Matrix4d e = mat(std::get<Pose3>(f.measurement)).inverse() *
                              mat(g.keyframe(f.vertices[0]).pose).inverse() * mat(g.keyframe(f.vertices[1]).pose);
    CHECK((residual(f, g) - reference_log(e)).norm() <= 1e-9);

    SGraph gp;
    const FactorId qf = random_factor_graph(gp, FactorKind::PlaneObs, rng);
    const Factor& q = gp.factor(qf);
    const Pose3& pose = gp.keyframe(q.vertices[0]).pose;
    const PlaneParams& wall = gp.wall(q.vertices[1]).plane;
    const PlaneParams& obs = std::get<PlaneParams>(q.measurement);
    const Vec3 n_pred = pose.rotation_matrix().transpose() * wall.normal;
    const double d_pred = wall.distance - wall.normal.dot(pose.translation());
    const Vec3 axis = obs.normal.cross(n_pred);
    const double angle = std::atan2(axis.norm(), obs.normal.dot(n_pred));
    const Vec3 rotvec = axis.normalized() * angle;
    const Mat32 basis = plane_tangent_basis(obs.normal);
    const Vec3 expect(basis.col(0).dot(rotvec), basis.col(1).dot(rotvec), d_pred - obs.distance);
    CHECK((residual(q, gp) - expect).norm() <= 1e-9);
  }
}

TEST_CASE("jacobians match central differences for every factor kind") {
  const FactorKind kinds[] = {FactorKind::Odometry,  FactorKind::LoopClosure, FactorKind::Reconnection,
                              FactorKind::PlaneObs,  FactorKind::RoomWalls,   FactorKind::FloorRooms};
  std::mt19937_64 rng(23);
  for (const FactorKind kind : kinds) {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      SGraph g;
      const FactorId f = random_factor_graph(g, kind, rng);
      worst = std::max(worst, jacobian_fd_error(g, f));
    }
    INFO(to_string(kind));
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("identity odometry jacobian has the adjoint form") {
  SGraph g;
  const VertexId k0 = g.add_keyframe(0, Pose3()), k1 = g.add_keyframe(1, Pose3());
  const FactorId f = g.add_factor(odometry(k0, k1, Pose3(), Eigen::MatrixXd::Identity(6, 6)));
  const auto blocks = jacobian(g.factor(f), g);
  REQUIRE(blocks.size() == 2);
  CHECK((blocks[0].block + Eigen::MatrixXd::Identity(6, 6)).norm() <= 1e-12);
  CHECK((blocks[1].block - Eigen::MatrixXd::Identity(6, 6)).norm() <= 1e-12);
  CHECK(jacobian_fd_error(g, f) <= 1e-5);

  g.set_fixed(k0, true);
  g.set_fixed(k1, true);
  CHECK(jacobian(g.factor(f), g).empty());
}

TEST_CASE("zero residual graph converges immediately") {
  SGraph g;
  const VertexId k0 = g.add_keyframe(0, Pose3()), k1 = g.add_keyframe(1, Pose3());
  g.add_factor(odometry(k0, k1, Pose3(), Eigen::MatrixXd::Identity(6, 6)));
  g.set_fixed(k0, true);
  const OptimizeStats s = optimize(g, {k1}, {});
  CHECK(s.converged);
  CHECK(s.iterations <= 1);
  CHECK(s.chi2_initial == 0.0);
  CHECK(s.chi2_final == 0.0);
}

TEST_CASE("three keyframe chain recovers ground truth") {
  std::mt19937_64 rng(24);
  const Pose3 t0 = Pose3(), t1 = exp(rand_tangent(rng, 0.3, 1.0)), t2 = compose(t1, exp(rand_tangent(rng, 0.3, 1.0)));
  SGraph g;
  const VertexId k0 = g.add_keyframe(0, t0);
  const VertexId k1 = g.add_keyframe(1, compose(t1, exp(rand_tangent(rng, 0.05, 0.2))));
  const VertexId k2 = g.add_keyframe(2, compose(t2, exp(rand_tangent(rng, 0.05, 0.2))));
  g.add_factor(odometry(k0, k1, between(t0, t1), Eigen::MatrixXd::Identity(6, 6) * 100));
  g.add_factor(odometry(k1, k2, between(t1, t2), Eigen::MatrixXd::Identity(6, 6) * 100));
  g.set_fixed(k0, true);
  OptimizeConfig cfg;
  cfg.convergence_tol = 1e-12;
  const OptimizeStats s = optimize(g, {k1, k2}, cfg);
  CHECK(s.chi2_final <= 1e-12);
  CHECK(s.chi2_final <= s.chi2_initial);
  CHECK(log(between(g.keyframe(k1).pose, t1)).norm() <= 1e-6);
  CHECK(log(between(g.keyframe(k2).pose, t2)).norm() <= 1e-6);
}

TEST_CASE("ten vertex pose graph matches dense reference") {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 5; ++trial) CHECK(ten_vertex_reference_gap(rng) <= 1e-6);
}

TEST_CASE("fixed and excluded vertices are untouched, results deterministic") {
  std::mt19937_64 rng(26);
  SGraph g;
  for (int i = 0; i < 6; ++i) g.add_keyframe(i, rand_pose(rng));
  for (int i = 0; i + 1 < 6; ++i) {
    g.add_factor(odometry(keyframe_id(i), keyframe_id(i + 1), exp(rand_tangent(rng, 0.2, 1.0)), Eigen::MatrixXd::Identity(6, 6)));
  }
  g.set_fixed(keyframe_id(0), true);
  const std::set<VertexId> free{keyframe_id(1), keyframe_id(2), keyframe_id(3)};
  const SGraph before = g;
  SGraph copy = g;
  const OptimizeStats a = optimize(g, free, {});
  const OptimizeStats b = optimize(copy, free, {});
  CHECK(a.iterations == b.iterations);
  CHECK(a.chi2_final == b.chi2_final);
  CHECK(g == copy);
  CHECK(a.num_free_vertices == 3);
  CHECK(a.num_factors == 4);
  for (const int i : {0, 4, 5}) {
    const Pose3& now = g.keyframe(keyframe_id(i)).pose;
    const Pose3& was = before.keyframe(keyframe_id(i)).pose;
    CHECK(now.rotation().coeffs() == was.rotation().coeffs());
    CHECK(now.translation() == was.translation());
  }
}

TEST_CASE("monotone chi2 and error cases") {
  std::mt19937_64 rng(27);
  SGraph g;
  for (int i = 0; i < 4; ++i) g.add_keyframe(i, rand_pose(rng));
  g.add_factor(odometry(keyframe_id(0), keyframe_id(1), Pose3(), Eigen::MatrixXd::Identity(6, 6)));
  g.set_fixed(keyframe_id(0), true);

  double prev = 1e300;
  for (int i = 0; i < 5; ++i) {
    OptimizeConfig one;
    one.max_iterations = 1;
    const OptimizeStats s = optimize(g, {keyframe_id(1)}, one);
    CHECK(s.chi2_final <= s.chi2_initial + 1e-12);
    CHECK(s.chi2_initial <= prev + 1e-12);
    prev = s.chi2_final;
  }

  auto code = [&](const std::set<VertexId>& free) {
    try {
      optimize(g, free, {});
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code({keyframe_id(3)}) == ErrorCode::EmptyProblem);
  CHECK(code({keyframe_id(0)}) == ErrorCode::InvalidArgument);
  CHECK(code({keyframe_id(9)}) == ErrorCode::UnknownVertex);
}
