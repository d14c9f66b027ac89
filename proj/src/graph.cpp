#include "sgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Eigenvalues>

#include "sgraph/error.hpp"
#include "sgraph/text.hpp"

namespace sgraph {

namespace {

constexpr std::array<char, 4> kKindTag = {'k', 'w', 'r', 'f'};

bool same_pose(const Pose3& a, const Pose3& b) {
  return a.rotation().coeffs() == b.rotation().coeffs() && a.translation() == b.translation();
}

bool same_plane(const PlaneParams& a, const PlaneParams& b) {
  return a.normal == b.normal && a.distance == b.distance;
}

bool same_measurement(const Measurement& a, const Measurement& b) {
  if (a.index() != b.index()) return false;
  if (const auto* p = std::get_if<Pose3>(&a)) return same_pose(*p, std::get<Pose3>(b));
  if (const auto* p = std::get_if<PlaneParams>(&a)) return same_plane(*p, std::get<PlaneParams>(b));
  return true;
}

std::string unknown(VertexId id) { return "vertex " + to_string(id) + " does not exist"; }

}  // namespace

std::string to_string(VertexId id) {
  return kKindTag[static_cast<std::size_t>(id.kind)] + std::to_string(id.index);
}

VertexId parse_vertex_id(const std::string& text) {
  if (text.size() < 2) throw Error(ErrorCode::ParseError, "bad vertex id '" + text + "'");
  const auto it = std::find(kKindTag.begin(), kKindTag.end(), text[0]);
  if (it == kKindTag.end()) throw Error(ErrorCode::ParseError, "bad vertex id '" + text + "'");
  VertexId id;
  id.kind = static_cast<VertexKind>(it - kKindTag.begin());
  id.index = text::parse_uint(std::string_view(text).substr(1), "vertex index");
  return id;
}

std::string to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::Odometry: return "odometry";
    case FactorKind::LoopClosure: return "loop_closure";
    case FactorKind::Reconnection: return "reconnection";
    case FactorKind::PlaneObs: return "plane_obs";
    case FactorKind::RoomWalls: return "room_walls";
    case FactorKind::FloorRooms: return "floor_rooms";
  }
  return "unknown";
}

FactorKind parse_factor_kind(const std::string& text) {
  for (int k = 0; k <= static_cast<int>(FactorKind::FloorRooms); ++k) {
    if (to_string(static_cast<FactorKind>(k)) == text) return static_cast<FactorKind>(k);
  }
  throw Error(ErrorCode::ParseError, "unknown factor kind '" + text + "'");
}

int residual_dimension(FactorKind kind) {
  switch (kind) {
    case FactorKind::Odometry:
    case FactorKind::LoopClosure:
    case FactorKind::Reconnection: return 6;
    case FactorKind::PlaneObs: return 3;
    case FactorKind::RoomWalls:
    case FactorKind::FloorRooms: return 2;
  }
  return 0;
}

VertexId SGraph::add_keyframe(double stamp, const Pose3& initial_pose) {
  if (has_stamp_ && !(stamp > last_stamp_)) {
    throw Error(ErrorCode::NonMonotoneStamp, "keyframe stamp " + text::format_double(stamp) +
                                                 " does not exceed " + text::format_double(last_stamp_));
  }
  const VertexId id = keyframe_id(next_index_[0]++);
  keyframes_.emplace(id.index, KeyframeVertex{id, initial_pose, stamp, false, false});
  adjacency_[id];
  last_stamp_ = stamp;
  has_stamp_ = true;
  return id;
}

VertexId SGraph::add_wall(const PlaneParams& plane) {
  const VertexId id = wall_id(next_index_[1]++);
  walls_.emplace(id.index, WallVertex{id, plane, false});
  adjacency_[id];
  return id;
}

VertexId SGraph::add_room(const Vec2& center, const std::array<VertexId, 4>& walls) {
  std::vector<VertexId> x_pair;
  std::vector<VertexId> y_pair;
  for (const VertexId w : walls) {
    if (w.kind != VertexKind::Wall || !walls_.contains(w.index)) {
      throw Error(ErrorCode::UnknownVertex, unknown(w));
    }
    const Vec3& n = walls_.at(w.index).plane.normal;
    (std::abs(n.x()) >= std::abs(n.y()) ? x_pair : y_pair).push_back(w);
  }
  if (x_pair.size() != 2 || y_pair.size() != 2) {
    throw Error(ErrorCode::InvalidRoom, "walls do not split into an x pair and a y pair");
  }
  auto order_pair = [&](std::vector<VertexId>& pair, int axis) {
    const Vec3& n0 = walls_.at(pair[0].index).plane.normal;
    const Vec3& n1 = walls_.at(pair[1].index).plane.normal;
    if (n0.dot(n1) > -0.95) {
      throw Error(ErrorCode::InvalidRoom, "opposing walls are not anti-parallel");
    }
    if (n0[axis] < n1[axis]) std::swap(pair[0], pair[1]);
  };
  order_pair(x_pair, 0);
  order_pair(y_pair, 1);
  const VertexId id = room_id(next_index_[2]++);
  rooms_.emplace(id.index, RoomVertex{id, center, {x_pair[0], x_pair[1], y_pair[0], y_pair[1]}, false});
  adjacency_[id];
  return id;
}

VertexId SGraph::add_floor(const Vec2& center, const std::vector<VertexId>& rooms) {
  for (const VertexId r : rooms) {
    if (r.kind != VertexKind::Room || !rooms_.contains(r.index)) throw Error(ErrorCode::UnknownVertex, unknown(r));
  }
  const VertexId id = floor_id(next_index_[3]++);
  floors_.emplace(id.index, FloorVertex{id, center, rooms, false});
  adjacency_[id];
  return id;
}

void SGraph::set_floor_rooms(VertexId floor_vertex, const std::vector<VertexId>& rooms) {
  FloorVertex& f = floor(floor_vertex);
  for (const VertexId r : rooms) {
    if (r.kind != VertexKind::Room || !rooms_.contains(r.index)) throw Error(ErrorCode::UnknownVertex, unknown(r));
  }
  f.room_ids = rooms;
}

void SGraph::validate_factor(const Factor& f) const {
  const std::size_t n = f.vertices.size();
  auto require_kind = [&](std::size_t i, VertexKind kind) {
    if (f.vertices[i].kind != kind) {
      throw Error(ErrorCode::ArityMismatch, to_string(f.kind) + " factor has wrong vertex kind at slot " +
                                                std::to_string(i));
    }
  };
  switch (f.kind) {
    case FactorKind::Odometry:
    case FactorKind::LoopClosure:
    case FactorKind::Reconnection:
      if (n != 2) throw Error(ErrorCode::ArityMismatch, to_string(f.kind) + " factor needs 2 keyframes");
      require_kind(0, VertexKind::Keyframe);
      require_kind(1, VertexKind::Keyframe);
      if (f.vertices[0] == f.vertices[1]) throw Error(ErrorCode::ArityMismatch, "pose factor joins a keyframe to itself");
      if (!std::holds_alternative<Pose3>(f.measurement)) throw Error(ErrorCode::ArityMismatch, "pose factor needs a Pose3 measurement");
      break;
    case FactorKind::PlaneObs:
      if (n != 2) throw Error(ErrorCode::ArityMismatch, "plane factor needs [keyframe, wall]");
      require_kind(0, VertexKind::Keyframe);
      require_kind(1, VertexKind::Wall);
      if (!std::holds_alternative<PlaneParams>(f.measurement)) throw Error(ErrorCode::ArityMismatch, "plane factor needs a plane measurement");
      break;
    case FactorKind::RoomWalls:
      if (n != 5) throw Error(ErrorCode::ArityMismatch, "room factor needs [room, 4 walls]");
      require_kind(0, VertexKind::Room);
      for (std::size_t i = 1; i < 5; ++i) require_kind(i, VertexKind::Wall);
      break;
    case FactorKind::FloorRooms:
      if (n < 2) throw Error(ErrorCode::ArityMismatch, "floor factor needs [floor, rooms...]");
      require_kind(0, VertexKind::Floor);
      for (std::size_t i = 1; i < n; ++i) require_kind(i, VertexKind::Room);
      break;
  }
  for (const VertexId v : f.vertices) {
    if (!contains(v)) throw Error(ErrorCode::UnknownVertex, unknown(v));
    if (v.kind == VertexKind::Keyframe && keyframes_.at(v.index).marginalized) {
      throw Error(ErrorCode::InvalidArgument, "factor references marginalized keyframe " + to_string(v));
    }
  }
  if (f.kind == FactorKind::RoomWalls) {
    const RoomVertex& r = rooms_.at(f.vertices[0].index);
    for (std::size_t i = 0; i < 4; ++i) {
      if (f.vertices[i + 1] != r.wall_ids[i]) {
        throw Error(ErrorCode::ArityMismatch, "room factor walls must match the room's canonical walls");
      }
    }
  }
  const int dim = residual_dimension(f.kind);
  const Eigen::MatrixXd& info = f.information;
  if (info.rows() != dim || info.cols() != dim) {
    throw Error(ErrorCode::BadInformation, "information must be " + std::to_string(dim) + "x" + std::to_string(dim));
  }
  if (!info.allFinite()) throw Error(ErrorCode::BadInformation, "information has non-finite entries");
  if ((info - info.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::BadInformation, "information is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9) {
    throw Error(ErrorCode::BadInformation, "information has a negative eigenvalue");
  }
}

FactorId SGraph::add_factor(Factor f) {
  validate_factor(f);
  // store exactly symmetric
  for (Eigen::Index r = 0; r < f.information.rows(); ++r) {
    for (Eigen::Index c = 0; c < r; ++c) f.information(r, c) = f.information(c, r);
  }
  f.id = next_factor_++;
  for (const VertexId v : f.vertices) adjacency_[v].insert(f.id);
  const FactorId id = f.id;
  factors_.emplace(id, std::move(f));
  return id;
}

void SGraph::remove_factor(FactorId id) {
  const auto it = factors_.find(id);
  if (it == factors_.end()) throw Error(ErrorCode::InvalidArgument, "factor " + std::to_string(id) + " does not exist");
  for (const VertexId v : it->second.vertices) adjacency_[v].erase(id);
  factors_.erase(it);
}

void SGraph::remove_vertex(VertexId id) {
  if (!contains(id)) throw Error(ErrorCode::UnknownVertex, unknown(id));
  const std::set<FactorId> incident = adjacency_.at(id);
  for (const FactorId f : incident) remove_factor(f);
  adjacency_.erase(id);
  switch (id.kind) {
    case VertexKind::Keyframe: keyframes_.erase(id.index); break;
    case VertexKind::Wall: walls_.erase(id.index); break;
    case VertexKind::Room: rooms_.erase(id.index); break;
    case VertexKind::Floor: floors_.erase(id.index); break;
  }
}

bool SGraph::contains(VertexId id) const {
  switch (id.kind) {
    case VertexKind::Keyframe: return keyframes_.contains(id.index);
    case VertexKind::Wall: return walls_.contains(id.index);
    case VertexKind::Room: return rooms_.contains(id.index);
    case VertexKind::Floor: return floors_.contains(id.index);
  }
  return false;
}

#define SGRAPH_ACCESSOR(Type, name, store, kind_enum)                                  \
  const Type& SGraph::name(VertexId id) const {                                        \
    const auto it = store.find(id.index);                                              \
    if (id.kind != VertexKind::kind_enum || it == store.end()) {                       \
      throw Error(ErrorCode::UnknownVertex, unknown(id));                              \
    }                                                                                  \
    return it->second;                                                                 \
  }                                                                                    \
  Type& SGraph::name(VertexId id) {                                                    \
    return const_cast<Type&>(static_cast<const SGraph&>(*this).name(id));              \
  }

SGRAPH_ACCESSOR(KeyframeVertex, keyframe, keyframes_, Keyframe)
SGRAPH_ACCESSOR(WallVertex, wall, walls_, Wall)
SGRAPH_ACCESSOR(RoomVertex, room, rooms_, Room)
SGRAPH_ACCESSOR(FloorVertex, floor, floors_, Floor)

#undef SGRAPH_ACCESSOR

const Factor& SGraph::factor(FactorId id) const {
  const auto it = factors_.find(id);
  if (it == factors_.end()) throw Error(ErrorCode::InvalidArgument, "factor " + std::to_string(id) + " does not exist");
  return it->second;
}

bool SGraph::is_fixed(VertexId id) const {
  switch (id.kind) {
    case VertexKind::Keyframe: return keyframe(id).fixed;
    case VertexKind::Wall: return wall(id).fixed;
    case VertexKind::Room: return room(id).fixed;
    case VertexKind::Floor: return floor(id).fixed;
  }
  return false;
}

void SGraph::set_fixed(VertexId id, bool fixed) {
  switch (id.kind) {
    case VertexKind::Keyframe: {
      KeyframeVertex& k = keyframe(id);
      if (fixed && k.marginalized) throw Error(ErrorCode::InvalidArgument, "cannot fix a marginalized keyframe");
      k.fixed = fixed;
      break;
    }
    case VertexKind::Wall: wall(id).fixed = fixed; break;
    case VertexKind::Room: room(id).fixed = fixed; break;
    case VertexKind::Floor: floor(id).fixed = fixed; break;
  }
}

bool SGraph::is_marginalized(VertexId id) const {
  return id.kind == VertexKind::Keyframe && keyframe(id).marginalized;
}

void SGraph::set_marginalized(VertexId id) {
  KeyframeVertex& k = keyframe(id);
  if (k.fixed) throw Error(ErrorCode::CannotMarginalizeFixed, to_string(id) + " is fixed");
  k.marginalized = true;
}

const std::set<FactorId>& SGraph::incident_factors(VertexId v) const {
  const auto it = adjacency_.find(v);
  if (it == adjacency_.end() || !contains(v)) throw Error(ErrorCode::UnknownVertex, unknown(v));
  return it->second;
}

std::set<VertexId> SGraph::neighbors(VertexId v) const {
  std::set<VertexId> out;
  for (const FactorId fid : incident_factors(v)) {
    for (const VertexId u : factors_.at(fid).vertices) {
      if (u != v) out.insert(u);
    }
  }
  return out;
}

int SGraph::connected_components_over_keyframes() const {
  std::set<std::uint64_t> seen;
  int components = 0;
  for (const auto& [index, kf] : keyframes_) {
    if (kf.marginalized || seen.contains(index)) continue;
    ++components;
    std::deque<std::uint64_t> queue{index};
    seen.insert(index);
    while (!queue.empty()) {
      const std::uint64_t cur = queue.front();
      queue.pop_front();
      for (const FactorId fid : adjacency_.at(keyframe_id(cur))) {
        const Factor& f = factors_.at(fid);
        if (!is_pose_factor(f.kind)) continue;
        for (const VertexId u : f.vertices) {
          if (keyframes_.at(u.index).marginalized || seen.contains(u.index)) continue;
          seen.insert(u.index);
          queue.push_back(u.index);
        }
      }
    }
  }
  return components;
}

std::optional<VertexId> SGraph::first_keyframe() const {
  if (keyframes_.empty()) return std::nullopt;
  return keyframes_.begin()->second.id;
}

std::optional<VertexId> SGraph::last_keyframe() const {
  if (keyframes_.empty()) return std::nullopt;
  return keyframes_.rbegin()->second.id;
}

std::size_t SGraph::vertex_count() const {
  return keyframes_.size() + walls_.size() + rooms_.size() + floors_.size();
}

bool SGraph::operator==(const SGraph& o) const {
  if (next_index_ != o.next_index_ || next_factor_ != o.next_factor_) return false;
  if (keyframes_.size() != o.keyframes_.size() || walls_.size() != o.walls_.size() ||
      rooms_.size() != o.rooms_.size() || floors_.size() != o.floors_.size() ||
      factors_.size() != o.factors_.size()) {
    return false;
  }
  for (const auto& [i, k] : keyframes_) {
    const auto it = o.keyframes_.find(i);
    if (it == o.keyframes_.end()) return false;
    const KeyframeVertex& m = it->second;
    if (k.id != m.id || k.stamp != m.stamp || k.marginalized != m.marginalized || k.fixed != m.fixed ||
        !same_pose(k.pose, m.pose)) {
      return false;
    }
  }
  for (const auto& [i, w] : walls_) {
    const auto it = o.walls_.find(i);
    if (it == o.walls_.end() || it->second.fixed != w.fixed || !same_plane(w.plane, it->second.plane)) return false;
  }
  for (const auto& [i, r] : rooms_) {
    const auto it = o.rooms_.find(i);
    if (it == o.rooms_.end() || it->second.fixed != r.fixed || it->second.center != r.center ||
        it->second.wall_ids != r.wall_ids) {
      return false;
    }
  }
  for (const auto& [i, f] : floors_) {
    const auto it = o.floors_.find(i);
    if (it == o.floors_.end() || it->second.fixed != f.fixed || it->second.center != f.center ||
        it->second.room_ids != f.room_ids) {
      return false;
    }
  }
  for (const auto& [i, f] : factors_) {
    const auto it = o.factors_.find(i);
    if (it == o.factors_.end()) return false;
    const Factor& g = it->second;
    if (f.kind != g.kind || f.vertices != g.vertices || !same_measurement(f.measurement, g.measurement) ||
        f.information != g.information) {
      return false;
    }
  }
  return adjacency_ == o.adjacency_;
}

// ---------------------------------------------------------------------------
// Text format
//
//   sgraph 1
//   next <keyframe> <wall> <room> <floor> <factor>
//   keyframe <idx> <stamp> <tx> <ty> <tz> <qx> <qy> <qz> <qw> <marginalized> <fixed>
//   wall <idx> <nx> <ny> <nz> <d> <fixed>
//   room <idx> <cx> <cy> <wall> <wall> <wall> <wall> <fixed>
//   floor <idx> <cx> <cy> <fixed> <n> <room>...
//   factor <id> <kind> <n> <vertex>... pose <tx> <ty> <tz> <qx> <qy> <qz> <qw> | plane <nx> <ny> <nz> <d> | none
//          <dim> <upper triangle, row-major>

namespace {

void put(std::string& out, double v) {
  out.push_back(' ');
  text::append_double(out, v);
}

void put_pose(std::string& out, const Pose3& p) {
  const Vec3& t = p.translation();
  const Eigen::Quaterniond& q = p.rotation();
  for (double v : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) put(out, v);
}

class LineReader {
 public:
  LineReader(std::vector<std::string_view> tokens, std::size_t line_no)
      : tokens_(std::move(tokens)), line_(line_no) {}

  std::string_view next() {
    if (pos_ >= tokens_.size()) fail("unexpected end of line");
    return tokens_[pos_++];
  }
  double number() { return wrap([&] { return text::parse_double(next()); }); }
  std::uint64_t uint() { return wrap([&] { return text::parse_uint(next()); }); }
  bool flag() {
    const std::uint64_t v = uint();
    if (v > 1) fail("flag must be 0 or 1");
    return v == 1;
  }
  VertexId vertex() { return wrap([&] { return parse_vertex_id(std::string(next())); }); }
  Pose3 pose() {
    const double tx = number(), ty = number(), tz = number();
    const double qx = number(), qy = number(), qz = number(), qw = number();
    return wrap([&] { return Pose3::from_raw(Eigen::Quaterniond(qw, qx, qy, qz), Vec3(tx, ty, tz)); });
  }
  void finish() const {
    if (pos_ != tokens_.size()) fail("trailing tokens");
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_) + ": " + msg);
  }

 private:
  template <typename F>
  auto wrap(F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const Error& e) {
      fail(e.what());
    }
  }

  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

}  // namespace

std::string serialize_graph(const SGraph& g) {
  std::string out = "sgraph 1\nnext";
  for (const std::uint64_t n : g.next_indices()) out += " " + std::to_string(n);
  out += " " + std::to_string(g.next_factor_id()) + "\n";
  for (const auto& [i, k] : g.keyframes()) {
    out += "keyframe " + std::to_string(i);
    put(out, k.stamp);
    put_pose(out, k.pose);
    out += k.marginalized ? " 1" : " 0";
    out += k.fixed ? " 1\n" : " 0\n";
  }
  for (const auto& [i, w] : g.walls()) {
    out += "wall " + std::to_string(i);
    for (double v : {w.plane.normal.x(), w.plane.normal.y(), w.plane.normal.z(), w.plane.distance}) put(out, v);
    out += w.fixed ? " 1\n" : " 0\n";
  }
  for (const auto& [i, r] : g.rooms()) {
    out += "room " + std::to_string(i);
    put(out, r.center.x());
    put(out, r.center.y());
    for (const VertexId w : r.wall_ids) out += " " + to_string(w);
    out += r.fixed ? " 1\n" : " 0\n";
  }
  for (const auto& [i, f] : g.floors()) {
    out += "floor " + std::to_string(i);
    put(out, f.center.x());
    put(out, f.center.y());
    out += f.fixed ? " 1" : " 0";
    out += " " + std::to_string(f.room_ids.size());
    for (const VertexId r : f.room_ids) out += " " + to_string(r);
    out += "\n";
  }
  for (const auto& [id, f] : g.factors()) {
    out += "factor " + std::to_string(id) + " " + to_string(f.kind) + " " + std::to_string(f.vertices.size());
    for (const VertexId v : f.vertices) out += " " + to_string(v);
    if (const auto* p = std::get_if<Pose3>(&f.measurement)) {
      out += " pose";
      put_pose(out, *p);
    } else if (const auto* pl = std::get_if<PlaneParams>(&f.measurement)) {
      out += " plane";
      for (double v : {pl->normal.x(), pl->normal.y(), pl->normal.z(), pl->distance}) put(out, v);
    } else {
      out += " none";
    }
    out += " " + std::to_string(f.information.rows());
    for (Eigen::Index r = 0; r < f.information.rows(); ++r) {
      for (Eigen::Index c = r; c < f.information.cols(); ++c) put(out, f.information(r, c));
    }
    out += "\n";
  }
  return out;
}

SGraph parse_graph(const std::string& contents) {
  SGraph g;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header = false;
  bool next_seen = false;
  while (start <= contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string::npos) end = contents.size();
    const std::string_view line(contents.data() + start, end - start);
    start = end + 1;
    ++line_no;
    auto tokens = text::split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') {
      if (end == contents.size()) break;
      continue;
    }
    LineReader in(tokens, line_no);
    const std::string tag(in.next());
    if (!header) {
      if (tag != "sgraph" || in.uint() != 1) in.fail("missing 'sgraph 1' header");
      in.finish();
      header = true;
      continue;
    }
    if (tag == "next") {
      for (auto& n : g.next_index_) n = in.uint();
      g.next_factor_ = in.uint();
      next_seen = true;
    } else if (tag == "keyframe") {
      KeyframeVertex k;
      k.id = keyframe_id(in.uint());
      k.stamp = in.number();
      k.pose = in.pose();
      k.marginalized = in.flag();
      k.fixed = in.flag();
      if (k.marginalized && k.fixed) in.fail("keyframe is both marginalized and fixed");
      if (g.has_stamp_ && !(k.stamp > g.last_stamp_)) in.fail("keyframe stamps must increase");
      if (g.keyframes_.contains(k.id.index)) in.fail("duplicate keyframe");
      g.last_stamp_ = k.stamp;
      g.has_stamp_ = true;
      g.adjacency_[k.id];
      g.keyframes_.emplace(k.id.index, k);
    } else if (tag == "wall") {
      WallVertex w;
      w.id = wall_id(in.uint());
      const double nx = in.number(), ny = in.number(), nz = in.number(), d = in.number();
      try {
        w.plane = PlaneParams::from_raw(Vec3(nx, ny, nz), d);
      } catch (const Error& e) {
        in.fail(e.what());
      }
      w.fixed = in.flag();
      if (g.walls_.contains(w.id.index)) in.fail("duplicate wall");
      g.adjacency_[w.id];
      g.walls_.emplace(w.id.index, w);
    } else if (tag == "room") {
      RoomVertex r;
      r.id = room_id(in.uint());
      r.center.x() = in.number();
      r.center.y() = in.number();
      for (auto& w : r.wall_ids) {
        w = in.vertex();
        if (w.kind != VertexKind::Wall || !g.walls_.contains(w.index)) in.fail("room references unknown wall");
      }
      r.fixed = in.flag();
      if (g.rooms_.contains(r.id.index)) in.fail("duplicate room");
      g.adjacency_[r.id];
      g.rooms_.emplace(r.id.index, r);
    } else if (tag == "floor") {
      FloorVertex f;
      f.id = floor_id(in.uint());
      f.center.x() = in.number();
      f.center.y() = in.number();
      f.fixed = in.flag();
      const std::uint64_t n = in.uint();
      for (std::uint64_t i = 0; i < n; ++i) {
        const VertexId r = in.vertex();
        if (r.kind != VertexKind::Room || !g.rooms_.contains(r.index)) in.fail("floor references unknown room");
        f.room_ids.push_back(r);
      }
      if (g.floors_.contains(f.id.index)) in.fail("duplicate floor");
      g.adjacency_[f.id];
      g.floors_.emplace(f.id.index, f);
    } else if (tag == "factor") {
      Factor f;
      f.id = in.uint();
      try {
        f.kind = parse_factor_kind(std::string(in.next()));
      } catch (const Error& e) {
        in.fail(e.what());
      }
      const std::uint64_t n = in.uint();
      for (std::uint64_t i = 0; i < n; ++i) f.vertices.push_back(in.vertex());
      const std::string payload(in.next());
      if (payload == "pose") {
        f.measurement = in.pose();
      } else if (payload == "plane") {
        const double nx = in.number(), ny = in.number(), nz = in.number(), d = in.number();
        try {
          f.measurement = PlaneParams::from_raw(Vec3(nx, ny, nz), d);
        } catch (const Error& e) {
          in.fail(e.what());
        }
      } else if (payload != "none") {
        in.fail("unknown measurement payload '" + payload + "'");
      }
      const std::uint64_t dim = in.uint();
      if (dim > 6) in.fail("information dimension too large");
      f.information.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
      for (Eigen::Index r = 0; r < f.information.rows(); ++r) {
        for (Eigen::Index c = r; c < f.information.cols(); ++c) {
          f.information(r, c) = in.number();
          f.information(c, r) = f.information(r, c);
        }
      }
      if (g.factors_.contains(f.id)) in.fail("duplicate factor id");
      try {
        g.validate_factor(f);
      } catch (const Error& e) {
        in.fail(e.what());
      }
      for (const VertexId v : f.vertices) g.adjacency_[v].insert(f.id);
      g.factors_.emplace(f.id, std::move(f));
    } else {
      in.fail("unknown record '" + tag + "'");
    }
    in.finish();
    if (end == contents.size()) break;
  }
  if (!header) throw Error(ErrorCode::ParseError, "empty graph file");
  if (!next_seen) throw Error(ErrorCode::ParseError, "missing 'next' record");
  auto check_next = [&](const auto& store, std::uint64_t next) {
    if (!store.empty() && store.rbegin()->first >= next) {
      throw Error(ErrorCode::ParseError, "'next' counter is not above existing indices");
    }
  };
  check_next(g.keyframes_, g.next_index_[0]);
  check_next(g.walls_, g.next_index_[1]);
  check_next(g.rooms_, g.next_index_[2]);
  check_next(g.floors_, g.next_index_[3]);
  check_next(g.factors_, g.next_factor_);
  return g;
}

}  // namespace sgraph
