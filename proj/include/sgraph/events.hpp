#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sgraph/manifold.hpp"

namespace sgraph {

struct OdometryEvent {
  double stamp = 0.0;
  Pose3 rel_pose;
  Mat6 information = Mat6::Identity();
};

struct PlaneObsEvent {
  double stamp = 0.0;
  std::uint64_t wall_key = 0;
  PlaneParams plane;  // keyframe frame
  Mat3 information = Mat3::Identity();
};

struct RoomDetectedEvent {
  std::uint64_t room_key = 0;
  std::array<std::uint64_t, 4> wall_keys{};
  std::uint64_t floor_key = 0;
};

struct LoopClosureEvent {
  double stamp_a = 0.0;
  double stamp_b = 0.0;
  Pose3 rel_pose;  // pose at stamp_b expressed in the frame at stamp_a
  Mat6 information = Mat6::Identity();
};

struct GroundTruthEvent {
  double stamp = 0.0;
  Pose3 pose;
};

using Event = std::variant<OdometryEvent, PlaneObsEvent, RoomDetectedEvent, LoopClosureEvent, GroundTruthEvent>;

/// Single-line JSON object. Type tags: odometry, plane_obs, room_detected,
/// loop_closure, ground_truth.
std::string to_json_line(const Event& e);
/// Throws ParseError on malformed input, unknown type or unknown fields.
Event parse_event(const std::string& line);

/// One event per line, '\n' terminated.
std::string write_events(const std::vector<Event>& events);
/// Blank lines are skipped; ParseError messages carry the 1-based line number.
std::vector<Event> read_events(const std::string& text);

}  // namespace sgraph
