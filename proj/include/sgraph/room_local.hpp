#pragma once

#include <array>
#include <optional>
#include <set>
#include <vector>

#include "sgraph/graph.hpp"
#include "sgraph/optimizer.hpp"

namespace sgraph {

/// True iff n·(k − n·d) < 0 for all four walls, i.e. k lies strictly on the
/// inner side of every wall. Walls must have outward-facing normals.
bool keyframe_in_room(const Vec3& k, const std::array<PlaneParams, 4>& walls);
bool keyframe_in_room(const Vec3& k, const RoomVertex& room, const SGraph& g);

struct RoomLocalProblem {
  VertexId room;
  std::vector<VertexId> inside_keyframes;  // by stamp
  std::vector<VertexId> wall_ids;
  std::vector<VertexId> exterior_fixed_keyframes;
  std::optional<VertexId> floor;
};

/// Errors: UnknownRoom, NoInsideKeyframes.
RoomLocalProblem build_room_local_problem(const SGraph& g, VertexId room);

/// Optimizes the inside keyframes, the walls, the room and its floor while
/// the exterior observers are held fixed for the duration of the call.
OptimizeStats room_local_optimize(SGraph& g, const RoomLocalProblem& p, const OptimizeConfig& cfg);

/// Every inside keyframe except the earliest one. Fixed keyframes, the
/// graph's first keyframe and `keep` (the room's persistent kept keyframe)
/// are never returned.
std::set<VertexId> select_marginalizable(const SGraph& g, const RoomLocalProblem& p,
                                         std::optional<VertexId> keep = std::nullopt);

/// Holds a set of vertices fixed and restores their previous flags on scope
/// exit.
class ScopedFix {
 public:
  explicit ScopedFix(SGraph& g) : g_(g) {}
  ScopedFix(const ScopedFix&) = delete;
  ScopedFix& operator=(const ScopedFix&) = delete;
  ~ScopedFix();

  void fix(VertexId v);

 private:
  SGraph& g_;
  std::vector<VertexId> changed_;
};

}  // namespace sgraph
