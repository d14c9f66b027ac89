#include "sgraph/room_local.hpp"

#include <algorithm>

#include "sgraph/error.hpp"

namespace sgraph {

bool keyframe_in_room(const Vec3& k, const std::array<PlaneParams, 4>& walls) {
  for (const PlaneParams& w : walls) {
    if (!(w.normal.dot(k - w.anchor()) < 0.0)) return false;
  }
  return true;
}

bool keyframe_in_room(const Vec3& k, const RoomVertex& room, const SGraph& g) {
  std::array<PlaneParams, 4> walls;
  for (std::size_t i = 0; i < 4; ++i) walls[i] = g.wall(room.wall_ids[i]).plane;
  return keyframe_in_room(k, walls);
}

ScopedFix::~ScopedFix() {
  for (const VertexId v : changed_) g_.set_fixed(v, false);
}

void ScopedFix::fix(VertexId v) {
  if (g_.is_fixed(v)) return;
  g_.set_fixed(v, true);
  changed_.push_back(v);
}

RoomLocalProblem build_room_local_problem(const SGraph& g, VertexId room) {
  if (room.kind != VertexKind::Room || !g.contains(room)) {
    throw Error(ErrorCode::UnknownRoom, to_string(room) + " is not a room of this graph");
  }
  const RoomVertex& r = g.room(room);
  RoomLocalProblem p;
  p.room = room;

  // Keyframe indices increase with stamp, so index order is stamp order.
  for (const auto& [index, k] : g.keyframes()) {
    if (!k.marginalized && keyframe_in_room(k.pose.translation(), r, g)) p.inside_keyframes.push_back(k.id);
  }
  if (p.inside_keyframes.empty()) {
    throw Error(ErrorCode::NoInsideKeyframes, "no keyframe lies inside " + to_string(room));
  }

  std::set<VertexId> walls(r.wall_ids.begin(), r.wall_ids.end());
  for (const VertexId k : p.inside_keyframes) {
    for (const FactorId fid : g.incident_factors(k)) {
      const Factor& f = g.factor(fid);
      if (f.kind == FactorKind::PlaneObs) walls.insert(f.vertices[1]);
    }
  }
  p.wall_ids.assign(walls.begin(), walls.end());

  const std::set<VertexId> inside(p.inside_keyframes.begin(), p.inside_keyframes.end());
  std::set<VertexId> exterior;
  for (const VertexId w : p.wall_ids) {
    for (const FactorId fid : g.incident_factors(w)) {
      const Factor& f = g.factor(fid);
      if (f.kind != FactorKind::PlaneObs) continue;
      const VertexId k = f.vertices[0];
      if (!inside.contains(k) && !g.is_marginalized(k)) exterior.insert(k);
    }
  }
  p.exterior_fixed_keyframes.assign(exterior.begin(), exterior.end());

  for (const auto& [index, fl] : g.floors()) {
    if (std::find(fl.room_ids.begin(), fl.room_ids.end(), room) != fl.room_ids.end()) {
      p.floor = fl.id;
      break;
    }
  }
  return p;
}

OptimizeStats room_local_optimize(SGraph& g, const RoomLocalProblem& p, const OptimizeConfig& cfg) {
  std::vector<VertexId> members(p.inside_keyframes);
  members.insert(members.end(), p.wall_ids.begin(), p.wall_ids.end());
  members.push_back(p.room);
  if (p.floor) members.push_back(*p.floor);

  bool anchored = false;
  for (const VertexId v : members) anchored = anchored || g.is_fixed(v);
  for (const VertexId v : p.exterior_fixed_keyframes) anchored = anchored || g.is_fixed(v);

  ScopedFix hold(g);
  for (const VertexId v : p.exterior_fixed_keyframes) hold.fix(v);
  if (!anchored) hold.fix(p.inside_keyframes.front());

  std::set<VertexId> free;
  for (const VertexId v : members) {
    if (!g.is_fixed(v)) free.insert(v);
  }
  return optimize(g, free, cfg);
}

std::set<VertexId> select_marginalizable(const SGraph& g, const RoomLocalProblem& p, std::optional<VertexId> keep) {
  std::set<VertexId> out;
  const std::optional<VertexId> first = g.first_keyframe();
  for (std::size_t i = 1; i < p.inside_keyframes.size(); ++i) {
    const VertexId k = p.inside_keyframes[i];
    if (g.is_fixed(k) || k == first || k == keep) continue;
    out.insert(k);
  }
  return out;
}

}  // namespace sgraph
