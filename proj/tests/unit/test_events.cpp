#include <doctest.h>

#include <random>

#include "scenes.hpp"
#include "sgraph/events.hpp"

using namespace sgraph;
using scenes::error_of;

namespace {

bool same_pose(const Pose3& a, const Pose3& b) {
  return a.translation() == b.translation() && a.rotation().coeffs() == b.rotation().coeffs();
}

std::vector<Event> sample_events(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  auto pose = [&] {
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return Pose3(q, Vec3(n(rng), n(rng), n(rng)) * 3.0);
  };
  auto info6 = [&] {
    Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Random();
    return Mat6(a * a.transpose() + Mat6::Identity());
  };
  std::vector<Event> out;
  out.push_back(OdometryEvent{0.1 * std::abs(n(rng)), pose(), info6()});
  out.push_back(PlaneObsEvent{1.0 / 3.0, 17, PlaneParams(Vec3(n(rng), n(rng), n(rng)), n(rng)),
                              Mat3::Identity() * 1e4 + Mat3::Constant(0.5)});
  out.push_back(RoomDetectedEvent{3, {4, 5, 6, 7}, 1});
  out.push_back(LoopClosureEvent{0.5, 12.25, pose(), info6()});
  out.push_back(GroundTruthEvent{7.125, pose()});
  return out;
}

}  // namespace

TEST_CASE("events round-trip bit-exactly") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<Event> events = sample_events(rng);
    const std::string text = write_events(events);
    const std::vector<Event> back = read_events(text);
    REQUIRE(back.size() == events.size());
    CHECK(write_events(back) == text);

    const auto& o0 = std::get<OdometryEvent>(events[0]);
    const auto& o1 = std::get<OdometryEvent>(back[0]);
    CHECK(o0.stamp == o1.stamp);
    CHECK(same_pose(o0.rel_pose, o1.rel_pose));
    CHECK(o0.information == o1.information);
    const auto& p0 = std::get<PlaneObsEvent>(events[1]);
    const auto& p1 = std::get<PlaneObsEvent>(back[1]);
    CHECK(p0.plane.normal == p1.plane.normal);
    CHECK(p0.plane.distance == p1.plane.distance);
    CHECK(p0.wall_key == p1.wall_key);
    CHECK(p0.information == p1.information);
    const auto& r1 = std::get<RoomDetectedEvent>(back[2]);
    CHECK(r1.room_key == 3);
    CHECK(r1.wall_keys == std::array<std::uint64_t, 4>{4, 5, 6, 7});
    CHECK(r1.floor_key == 1);
    const auto& l0 = std::get<LoopClosureEvent>(events[3]);
    const auto& l1 = std::get<LoopClosureEvent>(back[3]);
    CHECK(l1.stamp_a == 0.5);
    CHECK(l1.stamp_b == 12.25);
    CHECK(same_pose(l0.rel_pose, l1.rel_pose));
    CHECK(same_pose(std::get<GroundTruthEvent>(events[4]).pose, std::get<GroundTruthEvent>(back[4]).pose));
  }
}

TEST_CASE("event field names") {
  const std::string line = to_json_line(RoomDetectedEvent{2, {0, 1, 2, 3}, 0});
  CHECK(line == R"({"type":"room_detected","room_key":2,"wall_keys":[0,1,2,3],"floor_key":0})");
  const std::string gt = to_json_line(GroundTruthEvent{1.5, Pose3()});
  CHECK(gt == R"({"type":"ground_truth","stamp":1.5,"pose":[0.0,0.0,0.0,0.0,0.0,0.0,1.0]})");
}

TEST_CASE("malformed events are rejected") {
  const char* bad[] = {
      R"({"type":"ground_truth","stamp":1.5,"pose":[0,0,0,0,0,0,1],"extra":1})",
      R"({"type":"teleport","stamp":1.5})",
      R"({"type":"ground_truth","pose":[0,0,0,0,0,0,1]})",
      R"({"type":"ground_truth","stamp":1.5,"pose":[0,0,0,0,0,1]})",
      R"({"type":"ground_truth","stamp":1.5,"pose":[0,0,0,0,0,0,2]})",
      R"({"type":"ground_truth","stamp":"x","pose":[0,0,0,0,0,0,1]})",
      R"({"type":"room_detected","room_key":-1,"wall_keys":[0,1,2,3],"floor_key":0})",
      R"({"type":"room_detected","room_key":1,"wall_keys":[0,1,2],"floor_key":0})",
      R"({"type":"plane_obs","stamp":1,"wall_key":0,"plane":[1,0,0,1],"info":[1,0,0,1,0]})",
      R"({"type":"odometry","stamp":1,"rel_pose":[0,0,0,0,0,0,1],"info":[1]})",
      R"([1,2,3])",
      R"({"type":"odometry",)",
  };
  for (const char* line : bad) {
    CAPTURE(line);
    CHECK(error_of([&] { parse_event(line); }) == ErrorCode::ParseError);
  }
}

TEST_CASE("read errors carry the line number") {
  const std::string text = to_json_line(GroundTruthEvent{1.0, Pose3()}) + "\n\n" + R"({"type":"nope"})" + "\n";
  try {
    read_events(text);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(read_events("\n\n").empty());
}
