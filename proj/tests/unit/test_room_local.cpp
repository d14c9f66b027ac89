#include <doctest.h>

#include <algorithm>
#include <random>

#include "scenes.hpp"
#include "sgraph/room_local.hpp"

using namespace sgraph;
using namespace scenes;

TEST_CASE("containment on an axis-aligned room") {
  const auto w = box_walls(Vec2(1.0, -2.0), 3.0, 2.0, 0.0);
  CHECK(keyframe_in_room(Vec3(1.0, -2.0, 0.0), w));
  CHECK(keyframe_in_room(Vec3(3.9, -0.1, 7.0), w));
  CHECK_FALSE(keyframe_in_room(Vec3(4.1, -2.0, 0.0), w));
  CHECK_FALSE(keyframe_in_room(Vec3(1.0, 0.5, 0.0), w));
  // on a wall is outside: the test is strict
  CHECK_FALSE(keyframe_in_room(Vec3(4.0, -2.0, 0.0), w));
}

TEST_CASE("containment agrees with a rotated box oracle") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int inside = 0;
  for (int n = 0; n < 1000; ++n) {
    const Vec2 c(10 * u(rng), 10 * u(rng));
    const double hx = 1.0 + 4.0 * (u(rng) + 1.0), hy = 1.0 + 4.0 * (u(rng) + 1.0), yaw = 3.14 * u(rng);
    Vec3 p;
    do {
      p = Vec3(c.x() + 1.5 * hx * u(rng) + hy * u(rng), c.y() + 1.5 * hy * u(rng) + hx * u(rng), u(rng));
    } while (box_margin(c, hx, hy, yaw, p) < 1e-6);
    const bool expected = box_contains(c, hx, hy, yaw, p);
    inside += expected;
    CHECK(keyframe_in_room(p, box_walls(c, hx, hy, yaw)) == expected);
  }
  CHECK(inside > 100);
  CHECK(inside < 900);
}

TEST_CASE("containment is invariant under rigid motion") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 200; ++n) {
    const auto walls = box_walls(Vec2(u(rng), u(rng)), 2.0, 3.0, u(rng));
    Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
    q.normalize();
    const Pose3 t(q, Vec3(5 * u(rng), 5 * u(rng), 5 * u(rng)));
    const Vec3 p(3 * u(rng), 4 * u(rng), u(rng));
    std::array<PlaneParams, 4> moved;
    for (int i = 0; i < 4; ++i) moved[i] = transform_plane(t.inverse(), walls[i]);
    CHECK(keyframe_in_room(t.transform(p), moved) == keyframe_in_room(p, walls));
  }
}

TEST_CASE("room-local problem of the fixture room") {
  RoomScene s = room_scene();
  const RoomLocalProblem p = build_room_local_problem(s.g, s.room);
  CHECK(p.room == s.room);
  CHECK(p.inside_keyframes == std::vector<VertexId>{s.k[1], s.k[2], s.k[3], s.k[4]});
  CHECK(p.wall_ids.size() == 5);
  CHECK(std::find(p.wall_ids.begin(), p.wall_ids.end(), s.extra_wall) != p.wall_ids.end());
  CHECK(p.exterior_fixed_keyframes == std::vector<VertexId>{s.k[0], s.k[5]});
  REQUIRE(p.floor);
  CHECK(*p.floor == s.floor);
}

TEST_CASE("room-local problem skips marginalized keyframes") {
  RoomScene s = room_scene();
  for (const FactorId f : std::set<FactorId>(s.g.incident_factors(s.k[5]))) s.g.remove_factor(f);
  s.g.set_marginalized(s.k[5]);
  const RoomLocalProblem p = build_room_local_problem(s.g, s.room);
  CHECK(p.exterior_fixed_keyframes == std::vector<VertexId>{s.k[0]});
}

TEST_CASE("room-local problem errors") {
  RoomScene s = room_scene();
  CHECK(error_of([&] { build_room_local_problem(s.g, room_id(9)); }) == ErrorCode::UnknownRoom);
  CHECK(error_of([&] { build_room_local_problem(s.g, s.walls[0]); }) == ErrorCode::UnknownRoom);

  SGraph g;
  g.add_keyframe(0.0, at(50.0, 0.0));
  const auto planes = box_walls(Vec2::Zero(), 3.0, 2.0, 0.0);
  std::array<VertexId, 4> w;
  for (int i = 0; i < 4; ++i) w[i] = g.add_wall(planes[i]);
  const VertexId r = g.add_room(Vec2::Zero(), w);
  CHECK(error_of([&] { build_room_local_problem(g, r); }) == ErrorCode::NoInsideKeyframes);
}

TEST_CASE("marginalizable selection") {
  RoomScene s = room_scene();
  RoomLocalProblem p = build_room_local_problem(s.g, s.room);
  CHECK(select_marginalizable(s.g, p) == std::set<VertexId>{s.k[2], s.k[3], s.k[4]});
  CHECK(select_marginalizable(s.g, p, s.k[3]) == std::set<VertexId>{s.k[2], s.k[4]});
  s.g.set_fixed(s.k[4], true);
  CHECK(select_marginalizable(s.g, p) == std::set<VertexId>{s.k[2], s.k[3]});

  // the graph's first keyframe is never selected, even inside a room
  SGraph g;
  const auto planes = box_walls(Vec2::Zero(), 3.0, 2.0, 0.0);
  std::vector<VertexId> ks;
  for (int i = 0; i < 3; ++i) ks.push_back(g.add_keyframe(i, at(i - 1.0, 0.0)));
  std::array<VertexId, 4> w;
  for (int i = 0; i < 4; ++i) w[i] = g.add_wall(planes[i]);
  const VertexId r = g.add_room(Vec2::Zero(), w);
  RoomLocalProblem q = build_room_local_problem(g, r);
  q.inside_keyframes = {ks[1], ks[0], ks[2]};
  CHECK(select_marginalizable(g, q) == std::set<VertexId>{ks[2]});
}

TEST_CASE("room-local optimization holds exterior observers") {
  RoomScene s = room_scene();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int i = 1; i <= 4; ++i) {
    Tangent6 d;
    for (int j = 0; j < 6; ++j) d[j] = n(rng);
    s.g.keyframe(s.k[i]).pose = compose(s.g.keyframe(s.k[i]).pose, exp(d));
  }
  const Pose3 k5 = s.g.keyframe(s.k[5]).pose;
  const PlaneParams extra = s.g.wall(s.extra_wall).plane;
  const RoomLocalProblem p = build_room_local_problem(s.g, s.room);
  const OptimizeStats st = room_local_optimize(s.g, p, {});
  CHECK(st.chi2_final < st.chi2_initial);
  CHECK(st.chi2_final < 1e-10);
  CHECK(s.g.keyframe(s.k[5]).pose.translation() == k5.translation());
  CHECK(s.g.keyframe(s.k[5]).pose.rotation().coeffs() == k5.rotation().coeffs());
  CHECK_FALSE(s.g.is_fixed(s.k[5]));
  CHECK(s.g.is_fixed(s.k[0]));
  CHECK(s.g.wall(s.extra_wall).plane.distance == doctest::Approx(extra.distance).epsilon(1e-6));
  for (int i = 1; i <= 4; ++i) {
    CHECK(tangent_distance(s.g.keyframe(s.k[i]).pose, at(s.g.keyframe(s.k[i]).pose.translation().x(), 0.3)) < 1e-5);
  }
}

TEST_CASE("room-local optimization anchors an unanchored room") {
  RoomScene s = room_scene();
  s.g.set_fixed(s.k[0], false);
  for (const VertexId k : {s.k[0], s.k[5]}) {
    for (const FactorId f : std::set<FactorId>(s.g.incident_factors(k))) s.g.remove_factor(f);
  }
  const RoomLocalProblem p = build_room_local_problem(s.g, s.room);
  REQUIRE(p.exterior_fixed_keyframes.empty());
  const Pose3 first = s.g.keyframe(s.k[1]).pose;
  s.g.keyframe(s.k[2]).pose = compose(s.g.keyframe(s.k[2]).pose, exp(Tangent6::Constant(0.01)));
  room_local_optimize(s.g, p, {});
  CHECK(s.g.keyframe(s.k[1]).pose.translation() == first.translation());
  CHECK_FALSE(s.g.is_fixed(s.k[1]));
}

TEST_CASE("scoped fix restores flags") {
  RoomScene s = room_scene();
  {
    ScopedFix hold(s.g);
    hold.fix(s.k[0]);
    hold.fix(s.k[1]);
    hold.fix(s.k[1]);
    CHECK(s.g.is_fixed(s.k[1]));
  }
  CHECK(s.g.is_fixed(s.k[0]));
  CHECK_FALSE(s.g.is_fixed(s.k[1]));
}
