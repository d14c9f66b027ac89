#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "sgraph/manifold.hpp"

namespace sgraph {

enum class VertexKind : std::uint8_t { Keyframe = 0, Wall = 1, Room = 2, Floor = 3 };

struct VertexId {
  VertexKind kind = VertexKind::Keyframe;
  std::uint64_t index = 0;

  auto operator<=>(const VertexId&) const = default;
};

inline VertexId keyframe_id(std::uint64_t i) { return {VertexKind::Keyframe, i}; }
inline VertexId wall_id(std::uint64_t i) { return {VertexKind::Wall, i}; }
inline VertexId room_id(std::uint64_t i) { return {VertexKind::Room, i}; }
inline VertexId floor_id(std::uint64_t i) { return {VertexKind::Floor, i}; }

/// "k12", "w3", "r0", "f0".
std::string to_string(VertexId id);
/// Inverse of to_string; throws ParseError.
VertexId parse_vertex_id(const std::string& text);

struct KeyframeVertex {
  VertexId id;
  Pose3 pose;
  double stamp = 0.0;
  bool marginalized = false;
  bool fixed = false;
};

struct WallVertex {
  VertexId id;
  PlaneParams plane;
  bool fixed = false;
};

/// wall_ids are canonical: [a+, a-, b+, b-] where pair a has x-dominant
/// normals and pair b y-dominant normals, each pair ordered by the sign of
/// its dominant normal component.
struct RoomVertex {
  VertexId id;
  Vec2 center = Vec2::Zero();
  std::array<VertexId, 4> wall_ids;
  bool fixed = false;
};

struct FloorVertex {
  VertexId id;
  Vec2 center = Vec2::Zero();
  std::vector<VertexId> room_ids;
  bool fixed = false;
};

enum class FactorKind : std::uint8_t {
  Odometry = 0,
  LoopClosure = 1,
  Reconnection = 2,
  PlaneObs = 3,
  RoomWalls = 4,
  FloorRooms = 5,
};

std::string to_string(FactorKind kind);
FactorKind parse_factor_kind(const std::string& text);

inline bool is_pose_factor(FactorKind k) {
  return k == FactorKind::Odometry || k == FactorKind::LoopClosure || k == FactorKind::Reconnection;
}

/// Residual dimension of a factor kind.
int residual_dimension(FactorKind kind);

using FactorId = std::uint64_t;
using Measurement = std::variant<std::monostate, Pose3, PlaneParams>;

/// One measurement edge.
///   Odometry/LoopClosure/Reconnection: [keyframe a, keyframe b], Pose3 a⁻¹·b
///   PlaneObs: [keyframe, wall], PlaneParams in the keyframe frame
///   RoomWalls: [room, 4 walls in the room's canonical order], no payload
///   FloorRooms: [floor, rooms...], no payload
struct Factor {
  FactorId id = 0;
  FactorKind kind = FactorKind::Odometry;
  std::vector<VertexId> vertices;
  Measurement measurement;
  Eigen::MatrixXd information;
};

/// The four-layer situational graph. Value type: copying it is a deep,
/// mutation-independent snapshot.
class SGraph {
 public:
  VertexId add_keyframe(double stamp, const Pose3& initial_pose);
  VertexId add_wall(const PlaneParams& plane);
  /// Orders the walls canonically; throws InvalidRoom if they do not form two
  /// anti-parallel pairs, UnknownVertex if a wall is missing.
  VertexId add_room(const Vec2& center, const std::array<VertexId, 4>& walls);
  VertexId add_floor(const Vec2& center, const std::vector<VertexId>& rooms);
  void set_floor_rooms(VertexId floor, const std::vector<VertexId>& rooms);

  /// Validates arity, payload, and information; assigns and returns the id.
  FactorId add_factor(Factor f);
  void remove_factor(FactorId id);
  /// Removes a vertex together with every incident factor. Its index is never
  /// handed out again.
  void remove_vertex(VertexId id);

  bool contains(VertexId id) const;
  bool contains_factor(FactorId id) const { return factors_.contains(id); }

  const KeyframeVertex& keyframe(VertexId id) const;
  KeyframeVertex& keyframe(VertexId id);
  const WallVertex& wall(VertexId id) const;
  WallVertex& wall(VertexId id);
  const RoomVertex& room(VertexId id) const;
  RoomVertex& room(VertexId id);
  const FloorVertex& floor(VertexId id) const;
  FloorVertex& floor(VertexId id);
  const Factor& factor(FactorId id) const;

  const std::map<std::uint64_t, KeyframeVertex>& keyframes() const { return keyframes_; }
  const std::map<std::uint64_t, WallVertex>& walls() const { return walls_; }
  const std::map<std::uint64_t, RoomVertex>& rooms() const { return rooms_; }
  const std::map<std::uint64_t, FloorVertex>& floors() const { return floors_; }
  const std::map<FactorId, Factor>& factors() const { return factors_; }

  bool is_fixed(VertexId id) const;
  void set_fixed(VertexId id, bool fixed);
  bool is_marginalized(VertexId id) const;
  void set_marginalized(VertexId id);

  /// Factors incident to v; throws UnknownVertex.
  const std::set<FactorId>& incident_factors(VertexId v) const;
  /// All vertices sharing a factor with v; throws UnknownVertex.
  std::set<VertexId> neighbors(VertexId v) const;
  /// Components of the graph induced by non-marginalized keyframes and pose
  /// factors.
  int connected_components_over_keyframes() const;

  /// Lowest-index keyframe (the gauge anchor), if any.
  std::optional<VertexId> first_keyframe() const;
  std::optional<VertexId> last_keyframe() const;

  SGraph snapshot() const { return *this; }

  std::size_t vertex_count() const;
  std::size_t factor_count() const { return factors_.size(); }

  /// Next index each store would hand out, and the next factor id. Exposed for
  /// serialization.
  const std::array<std::uint64_t, 4>& next_indices() const { return next_index_; }
  FactorId next_factor_id() const { return next_factor_; }

  bool operator==(const SGraph& other) const;

 private:
  friend SGraph parse_graph(const std::string& text);

  void validate_factor(const Factor& f) const;

  std::map<std::uint64_t, KeyframeVertex> keyframes_;
  std::map<std::uint64_t, WallVertex> walls_;
  std::map<std::uint64_t, RoomVertex> rooms_;
  std::map<std::uint64_t, FloorVertex> floors_;
  std::map<FactorId, Factor> factors_;
  std::map<VertexId, std::set<FactorId>> adjacency_;
  std::array<std::uint64_t, 4> next_index_{};
  FactorId next_factor_ = 0;
  double last_stamp_ = 0.0;
  bool has_stamp_ = false;
};

/// Line-oriented text format, one record per line; doubles use the shortest
/// representation that round-trips, so parse(serialize(g)) == g bit-exactly.
std::string serialize_graph(const SGraph& g);
SGraph parse_graph(const std::string& text);

}  // namespace sgraph
