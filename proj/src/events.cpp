#include "sgraph/events.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sgraph/error.hpp"

namespace sgraph {

namespace {

using json = nlohmann::ordered_json;

json pose_json(const Pose3& p) {
  const Vec3& t = p.translation();
  const Eigen::Quaterniond& q = p.rotation();
  return json::array({t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()});
}

template <int N>
json info_json(const Eigen::Matrix<double, N, N>& m) {
  json out = json::array();
  for (int r = 0; r < N; ++r) {
    for (int c = r; c < N; ++c) out.push_back(m(r, c));
  }
  return out;
}

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

double number(const json& j, const char* key) {
  if (!j.contains(key)) fail(std::string("missing field '") + key + "'");
  const json& v = j.at(key);
  if (!v.is_number()) fail(std::string("field '") + key + "' is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(std::string("field '") + key + "' is not finite");
  return d;
}

std::uint64_t key_value(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    fail("field '" + key + "' is not a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::uint64_t key(const json& j, const char* name) {
  if (!j.contains(name)) fail(std::string("missing field '") + name + "'");
  return key_value(j.at(name), name);
}

std::vector<double> numbers(const json& j, const char* name, std::size_t count) {
  if (!j.contains(name)) fail(std::string("missing field '") + name + "'");
  const json& v = j.at(name);
  if (!v.is_array() || v.size() != count) {
    fail(std::string("field '") + name + "' must hold " + std::to_string(count) + " numbers");
  }
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number()) fail(std::string("field '") + name + "' holds a non-number");
    out.push_back(x.get<double>());
    if (!std::isfinite(out.back())) fail(std::string("field '") + name + "' holds a non-finite value");
  }
  return out;
}

Pose3 pose(const json& j, const char* name) {
  const std::vector<double> v = numbers(j, name, 7);
  const Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
  const Vec3 t(v[0], v[1], v[2]);
  const double norm = q.norm();
  if (std::abs(norm - 1.0) <= 1e-9) return Pose3::from_raw(q, t);
  if (std::abs(norm - 1.0) <= 1e-3) return Pose3(q, t);
  fail(std::string("field '") + name + "' quaternion is not unit length");
}

template <int N>
Eigen::Matrix<double, N, N> info(const json& j) {
  const std::vector<double> v = numbers(j, "info", static_cast<std::size_t>(N * (N + 1) / 2));
  Eigen::Matrix<double, N, N> m;
  std::size_t i = 0;
  for (int r = 0; r < N; ++r) {
    for (int c = r; c < N; ++c) {
      m(r, c) = v[i];
      m(c, r) = v[i];
      ++i;
    }
  }
  return m;
}

void only_fields(const json& j, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  ok.insert("type");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.contains(it.key())) fail("unknown field '" + it.key() + "'");
  }
}

}  // namespace

std::string to_json_line(const Event& e) {
  json j;
  std::visit(
      [&](const auto& ev) {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, OdometryEvent>) {
          j["type"] = "odometry";
          j["stamp"] = ev.stamp;
          j["rel_pose"] = pose_json(ev.rel_pose);
          j["info"] = info_json<6>(ev.information);
        } else if constexpr (std::is_same_v<T, PlaneObsEvent>) {
          j["type"] = "plane_obs";
          j["stamp"] = ev.stamp;
          j["wall_key"] = ev.wall_key;
          j["plane"] = json::array({ev.plane.normal.x(), ev.plane.normal.y(), ev.plane.normal.z(), ev.plane.distance});
          j["info"] = info_json<3>(ev.information);
        } else if constexpr (std::is_same_v<T, RoomDetectedEvent>) {
          j["type"] = "room_detected";
          j["room_key"] = ev.room_key;
          j["wall_keys"] = ev.wall_keys;
          j["floor_key"] = ev.floor_key;
        } else if constexpr (std::is_same_v<T, LoopClosureEvent>) {
          j["type"] = "loop_closure";
          j["stamp_a"] = ev.stamp_a;
          j["stamp_b"] = ev.stamp_b;
          j["rel_pose"] = pose_json(ev.rel_pose);
          j["info"] = info_json<6>(ev.information);
        } else {
          j["type"] = "ground_truth";
          j["stamp"] = ev.stamp;
          j["pose"] = pose_json(ev.pose);
        }
      },
      e);
  return j.dump();
}

Event parse_event(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& ex) {
    fail(std::string("malformed JSON: ") + ex.what());
  }
  if (!j.is_object()) fail("event is not a JSON object");
  if (!j.contains("type") || !j.at("type").is_string()) fail("missing field 'type'");
  const std::string type = j.at("type").get<std::string>();

  if (type == "odometry") {
    only_fields(j, {"stamp", "rel_pose", "info"});
    return OdometryEvent{number(j, "stamp"), pose(j, "rel_pose"), info<6>(j)};
  }
  if (type == "plane_obs") {
    only_fields(j, {"stamp", "wall_key", "plane", "info"});
    const std::vector<double> p = numbers(j, "plane", 4);
    const Vec3 n(p[0], p[1], p[2]);
    if (n.norm() < 1e-12) fail("plane normal is zero");
    const PlaneParams plane = std::abs(n.norm() - 1.0) <= 1e-9 ? PlaneParams::from_raw(n, p[3]) : PlaneParams(n, p[3]);
    return PlaneObsEvent{number(j, "stamp"), key(j, "wall_key"), plane, info<3>(j)};
  }
  if (type == "room_detected") {
    only_fields(j, {"room_key", "wall_keys", "floor_key"});
    if (!j.contains("wall_keys") || !j.at("wall_keys").is_array() || j.at("wall_keys").size() != 4) {
      fail("field 'wall_keys' must hold 4 keys");
    }
    RoomDetectedEvent ev;
    ev.room_key = key(j, "room_key");
    ev.floor_key = key(j, "floor_key");
    for (std::size_t i = 0; i < 4; ++i) ev.wall_keys[i] = key_value(j.at("wall_keys")[i], "wall_keys");
    return ev;
  }
  if (type == "loop_closure") {
    only_fields(j, {"stamp_a", "stamp_b", "rel_pose", "info"});
    return LoopClosureEvent{number(j, "stamp_a"), number(j, "stamp_b"), pose(j, "rel_pose"), info<6>(j)};
  }
  if (type == "ground_truth") {
    only_fields(j, {"stamp", "pose"});
    return GroundTruthEvent{number(j, "stamp"), pose(j, "pose")};
  }
  fail("unknown event type '" + type + "'");
}

std::string write_events(const std::vector<Event>& events) {
  std::string out;
  for (const Event& e : events) {
    out += to_json_line(e);
    out += '\n';
  }
  return out;
}

std::vector<Event> read_events(const std::string& text) {
  std::vector<Event> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_event(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(number) + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace sgraph
