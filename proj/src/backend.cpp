#include "sgraph/backend.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <limits>

#include <json.hpp>

#include "sgraph/error.hpp"
#include "sgraph/room_local.hpp"

namespace sgraph {

namespace {

double total_chi2(const SGraph& g) {
  double sum = 0.0;
  for (const auto& [id, f] : g.factors()) sum += factor_chi2(f, g);
  return sum;
}

double wall_offset(const PlaneParams& p, int axis) { return p.distance * (p.normal[axis] >= 0.0 ? 1.0 : -1.0); }

}  // namespace

std::string to_string(PipelineMode mode) { return mode == PipelineMode::Full ? "full" : "compressed"; }

PipelineMode parse_mode(const std::string& text) {
  if (text == "full") return PipelineMode::Full;
  if (text == "compressed") return PipelineMode::Compressed;
  throw Error(ErrorCode::ParseError, "mode must be 'full' or 'compressed', got '" + text + "'");
}

void BackendConfig::validate() const {
  if (window_size < 2) throw Error(ErrorCode::InvalidArgument, "window_size must be >= 2");
  if (local_trigger_every < 1) throw Error(ErrorCode::InvalidArgument, "local_trigger_every must be >= 1");
  if (timing_repeats < 1) throw Error(ErrorCode::InvalidArgument, "timing_repeats must be >= 1");
  if (!(room_information > 0.0) || !(floor_information > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "room and floor information must be positive");
  }
  local.validate();
  global.validate();
  room_local.validate();
}

std::string to_json_line(const StageRecord& r) {
  nlohmann::ordered_json j;
  j["stage"] = r.stage;
  j["stamp"] = r.stamp;
  j["wall_time_ms"] = r.wall_time_ms;
  j["chi2_initial"] = r.stats.chi2_initial;
  j["chi2_final"] = r.stats.chi2_final;
  j["free_vertices"] = r.stats.num_free_vertices;
  j["factors"] = r.stats.num_factors;
  j["iterations"] = r.stats.iterations;
  j["converged"] = r.stats.converged;
  if (r.compression) j["compression"] = nlohmann::ordered_json::parse(to_json(*r.compression));
  return j.dump();
}

Backend::Backend(BackendConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<StageRecord> Backend::ingest(const Event& e) {
  return std::visit(
      [&](const auto& ev) -> std::vector<StageRecord> {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, OdometryEvent>) {
          return on_odometry(ev);
        } else if constexpr (std::is_same_v<T, PlaneObsEvent>) {
          return on_plane(ev);
        } else if constexpr (std::is_same_v<T, RoomDetectedEvent>) {
          return on_room(ev);
        } else if constexpr (std::is_same_v<T, LoopClosureEvent>) {
          return on_loop(ev);
        } else {
          ground_truth_.emplace_back(ev.stamp, ev.pose);
          return {};
        }
      },
      e);
}

double Backend::last_stamp() const {
  const auto k = graph_.last_keyframe();
  return k ? graph_.keyframe(*k).stamp : 0.0;
}

VertexId Backend::keyframe_near(double stamp) const {
  if (stamp_index_.empty()) throw Error(ErrorCode::OutOfOrderEvent, "no keyframe exists yet");
  auto hi = stamp_index_.lower_bound(stamp);
  if (hi == stamp_index_.end()) return std::prev(hi)->second;
  if (hi == stamp_index_.begin()) return hi->second;
  auto lo = std::prev(hi);
  return (stamp - lo->first) <= (hi->first - stamp) ? lo->second : hi->second;
}

std::optional<VertexId> Backend::active_near(VertexId k) const {
  if (!graph_.is_marginalized(k)) return k;
  const double stamp = graph_.keyframe(k).stamp;
  std::optional<VertexId> best;
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& [s, id] : stamp_index_) {
    if (graph_.is_marginalized(id)) continue;
    const double d = std::abs(s - stamp);
    if (d < gap) {
      gap = d;
      best = id;
    }
  }
  return best;
}

std::optional<std::pair<VertexId, Pose3>> Backend::resolve(VertexId k) const {
  Pose3 offset;
  VertexId at = k;
  while (graph_.is_marginalized(at)) {
    const auto it = anchor_of_.find(at);
    if (it == anchor_of_.end()) {
      const auto near = active_near(at);
      if (!near) return std::nullopt;
      return std::make_pair(*near, compose(between(graph_.keyframe(*near).pose, graph_.keyframe(at).pose), offset));
    }
    offset = compose(it->second.second, offset);
    at = it->second.first;
  }
  return std::make_pair(at, offset);
}

Mat6 Backend::span_covariance(double s0, double s1) const {
  Mat6 sum = Mat6::Zero();
  if (s1 < s0) std::swap(s0, s1);
  for (auto it = step_covariance_.upper_bound(s0); it != step_covariance_.end() && it->first <= s1; ++it) {
    sum += it->second;
  }
  return sum;
}

StageRecord Backend::run_stage(const std::string& stage, double stamp, const std::set<VertexId>& free,
                               const OptimizeConfig& cfg) {
  for (const VertexId v : free) {
    if (graph_.is_marginalized(v)) {
      throw Error(ErrorCode::InvalidArgument, "marginalized " + to_string(v) + " in the free set of " + stage);
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i < cfg_.timing_repeats; ++i) {
    SGraph copy = graph_.snapshot();
    best = std::min(best, optimize(copy, free, cfg).wall_time);
  }
  StageRecord r;
  r.stage = stage;
  r.stamp = stamp;
  r.stats = optimize(graph_, free, cfg);
  r.wall_time_ms = 1000.0 * std::min(best, r.stats.wall_time);
  r.free_vertices.assign(free.begin(), free.end());
  return r;
}

std::vector<StageRecord> Backend::on_odometry(const OdometryEvent& e) {
  const auto last = graph_.last_keyframe();
  if (!last) {
    const VertexId k = graph_.add_keyframe(e.stamp, Pose3::identity());
    graph_.set_fixed(k, true);
    stamp_index_[e.stamp] = k;
    return {};
  }
  if (!(e.stamp > graph_.keyframe(*last).stamp)) {
    throw Error(ErrorCode::OutOfOrderEvent, "odometry stamp does not increase");
  }
  VertexId prev = *last;
  Pose3 measurement = e.rel_pose;
  if (graph_.is_marginalized(prev)) {
    const auto anchor = resolve(prev);
    if (!anchor) throw Error(ErrorCode::InvalidArgument, "no active keyframe to attach odometry to");
    measurement = compose(anchor->second, e.rel_pose);
    prev = anchor->first;
  }
  const Pose3 initial = compose(graph_.keyframe(prev).pose, measurement);
  const VertexId k = graph_.add_keyframe(e.stamp, initial);
  stamp_index_[e.stamp] = k;
  Factor f;
  f.kind = FactorKind::Odometry;
  f.vertices = {prev, k};
  f.measurement = measurement;
  f.information = e.information;
  graph_.add_factor(std::move(f));
  step_covariance_[e.stamp] = e.information.ldlt().solve(Mat6::Identity());

  std::vector<StageRecord> out;
  if (++keyframes_since_local_ >= cfg_.local_trigger_every) {
    keyframes_since_local_ = 0;
    int active = 0;
    for (auto it = graph_.keyframes().rbegin(); it != graph_.keyframes().rend() && active < 2; ++it) {
      active += it->second.marginalized ? 0 : 1;
    }
    if (active >= 2) out.push_back(local_optimize(e.stamp));
  }
  return out;
}

std::vector<StageRecord> Backend::on_plane(const PlaneObsEvent& e) {
  const auto it = stamp_index_.find(e.stamp);
  if (it == stamp_index_.end()) {
    throw Error(ErrorCode::OutOfOrderEvent, "plane observation at a stamp with no keyframe");
  }
  const VertexId k = it->second;
  if (graph_.is_marginalized(k)) return {};
  auto w = walls_.find(e.wall_key);
  if (w == walls_.end()) {
    const PlaneParams world = transform_plane(graph_.keyframe(k).pose.inverse(), e.plane);
    w = walls_.emplace(e.wall_key, graph_.add_wall(world)).first;
  }
  Factor f;
  f.kind = FactorKind::PlaneObs;
  f.vertices = {k, w->second};
  f.measurement = e.plane;
  f.information = e.information;
  graph_.add_factor(std::move(f));
  return {};
}

std::vector<StageRecord> Backend::on_room(const RoomDetectedEvent& e) {
  std::array<VertexId, 4> walls;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto it = walls_.find(e.wall_keys[i]);
    if (it == walls_.end()) {
      throw Error(ErrorCode::UnknownWallKey, "room references unobserved wall " + std::to_string(e.wall_keys[i]));
    }
    walls[i] = it->second;
  }
  ++counters_.rooms_detected;

  VertexId room;
  if (const auto it = rooms_.find(e.room_key); it != rooms_.end()) {
    room = it->second;
  } else {
    room = graph_.add_room(Vec2::Zero(), walls);
    RoomVertex& rv = graph_.room(room);
    const auto& w = rv.wall_ids;
    rv.center = Vec2(0.5 * (wall_offset(graph_.wall(w[0]).plane, 0) + wall_offset(graph_.wall(w[1]).plane, 0)),
                     0.5 * (wall_offset(graph_.wall(w[2]).plane, 1) + wall_offset(graph_.wall(w[3]).plane, 1)));
    rooms_.emplace(e.room_key, room);

    Factor rw;
    rw.kind = FactorKind::RoomWalls;
    rw.vertices = {room, w[0], w[1], w[2], w[3]};
    rw.information = Eigen::MatrixXd::Identity(2, 2) * cfg_.room_information;
    graph_.add_factor(std::move(rw));

    VertexId floor;
    std::vector<VertexId> members{room};
    if (const auto f = floors_.find(e.floor_key); f != floors_.end()) {
      floor = f->second;
      members = graph_.floor(floor).room_ids;
      members.push_back(room);
      graph_.set_floor_rooms(floor, members);
      graph_.remove_factor(floor_factor_.at(floor));
    } else {
      floor = graph_.add_floor(rv.center, members);
      floors_.emplace(e.floor_key, floor);
    }
    Vec2 mean = Vec2::Zero();
    for (const VertexId r : members) mean += graph_.room(r).center;
    graph_.floor(floor).center = mean / static_cast<double>(members.size());

    Factor fr;
    fr.kind = FactorKind::FloorRooms;
    fr.vertices = {floor};
    fr.vertices.insert(fr.vertices.end(), members.begin(), members.end());
    fr.information = Eigen::MatrixXd::Identity(2, 2) * cfg_.floor_information;
    floor_factor_[floor] = graph_.add_factor(std::move(fr));
  }

  if (cfg_.mode == PipelineMode::Full) return {};

  RoomLocalProblem problem;
  try {
    problem = build_room_local_problem(graph_, room);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::NoInsideKeyframes) throw;
    ++counters_.rooms_without_inside_keyframes;
    return {};
  }

  std::vector<StageRecord> out;
  const double stamp = last_stamp();
  {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i < cfg_.timing_repeats; ++i) {
      SGraph copy = graph_.snapshot();
      best = std::min(best, room_local_optimize(copy, problem, cfg_.room_local).wall_time);
    }
    StageRecord r;
    r.stage = "room_local";
    r.stamp = stamp;
    r.stats = room_local_optimize(graph_, problem, cfg_.room_local);
    r.wall_time_ms = 1000.0 * std::min(best, r.stats.wall_time);
    out.push_back(std::move(r));
  }

  std::optional<VertexId> keep;
  if (const auto it = kept_keyframe_.find(room); it != kept_keyframe_.end()) keep = it->second;
  std::set<VertexId> chosen = select_marginalizable(graph_, problem, keep);
  if (!keep) kept_keyframe_[room] = problem.inside_keyframes.front();
  // The next odometry edge attaches to the newest keyframe, so it stays.
  if (const auto newest = graph_.last_keyframe(); newest && chosen.erase(*newest) > 0) {
    ++counters_.keyframes_withheld;
  }
  const int inside = static_cast<int>(problem.inside_keyframes.size());
  counters_.room_inside_excluded.emplace_back(inside, inside - static_cast<int>(chosen.size()));

  StageRecord r;
  r.stage = "compression";
  r.stamp = stamp;
  r.stats.chi2_initial = total_chi2(graph_);
  const OptimizeStats timing = [&] {
    OptimizeStats s;
    const auto t0 = std::chrono::steady_clock::now();
    r.compression = compress(graph_, chosen, cfg_.reconnection_source);
    s.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
  }();
  r.wall_time_ms = 1000.0 * timing.wall_time;
  for (const VertexId k : r.compression->marginalized_keyframes) {
    const auto anchor = active_near(k);
    if (anchor) anchor_of_[k] = {*anchor, between(graph_.keyframe(*anchor).pose, graph_.keyframe(k).pose)};
  }
  r.stats.chi2_final = total_chi2(graph_);
  r.stats.num_factors = static_cast<int>(graph_.factor_count());
  r.stats.converged = true;
  out.push_back(std::move(r));
  return out;
}

std::vector<StageRecord> Backend::on_loop(const LoopClosureEvent& e) {
  if (stamp_index_.empty() || e.stamp_a > last_stamp() || e.stamp_b > last_stamp()) {
    throw Error(ErrorCode::OutOfOrderEvent, "loop closure refers to a future stamp");
  }
  const VertexId a = keyframe_near(e.stamp_a);
  const VertexId b = keyframe_near(e.stamp_b);
  const auto ra = resolve(a);
  const auto rb = resolve(b);
  if (!ra || !rb || ra->first == rb->first) {
    ++counters_.loop_closures_skipped;
    return {};
  }
  Pose3 m = e.rel_pose;
  Mat6 information = e.information;
  if (ra->first != a || rb->first != b) {
    m = compose(compose(ra->second, m), rb->second.inverse());
    // The stored offsets carry the drift of the steps they span.
    const auto stamp = [&](VertexId v) { return graph_.keyframe(v).stamp; };
    const Mat6 cov = e.information.ldlt().solve(Mat6::Identity()) + span_covariance(stamp(a), stamp(ra->first)) +
                     span_covariance(stamp(b), stamp(rb->first));
    information = cov.ldlt().solve(Mat6::Identity());
    information = (0.5 * (information + information.transpose())).eval();
    ++counters_.loop_closures_retargeted;
  }
  Factor f;
  f.kind = FactorKind::LoopClosure;
  f.vertices = {ra->first, rb->first};
  f.measurement = m;
  f.information = information;
  graph_.add_factor(std::move(f));
  ++counters_.loop_closures_added;
  return {global_optimize(e.stamp_b)};
}

StageRecord Backend::local_optimize(double stamp) {
  std::vector<VertexId> window;
  for (auto it = graph_.keyframes().rbegin(); it != graph_.keyframes().rend(); ++it) {
    if (static_cast<int>(window.size()) >= cfg_.window_size) break;
    if (!it->second.marginalized) window.push_back(it->second.id);
  }
  if (window.size() < 2) throw Error(ErrorCode::InvalidArgument, "local optimization needs two active keyframes");
  std::reverse(window.begin(), window.end());
  const std::set<VertexId> in_window(window.begin(), window.end());

  std::set<VertexId> entities;
  for (const VertexId k : window) {
    for (const FactorId fid : graph_.incident_factors(k)) {
      const Factor& f = graph_.factor(fid);
      if (f.kind == FactorKind::PlaneObs) entities.insert(f.vertices[1]);
    }
  }
  std::set<VertexId> observers;
  std::set<VertexId> rooms;
  for (const VertexId w : entities) {
    for (const FactorId fid : graph_.incident_factors(w)) {
      const Factor& f = graph_.factor(fid);
      if (f.kind == FactorKind::PlaneObs && !in_window.contains(f.vertices[0])) observers.insert(f.vertices[0]);
      if (f.kind == FactorKind::RoomWalls) rooms.insert(f.vertices[0]);
    }
  }
  for (const VertexId r : rooms) {
    entities.insert(r);
    for (const FactorId fid : graph_.incident_factors(r)) {
      const Factor& f = graph_.factor(fid);
      if (f.kind == FactorKind::FloorRooms) entities.insert(f.vertices[0]);
    }
  }

  bool anchored = false;
  for (const VertexId v : window) anchored = anchored || graph_.is_fixed(v);
  for (const VertexId v : entities) anchored = anchored || graph_.is_fixed(v);
  for (const VertexId v : observers) anchored = anchored || graph_.is_fixed(v);

  ScopedFix hold(graph_);
  for (const VertexId v : observers) hold.fix(v);
  if (!anchored) hold.fix(window.front());

  std::set<VertexId> free;
  for (const VertexId v : window) {
    if (!graph_.is_fixed(v)) free.insert(v);
  }
  for (const VertexId v : entities) {
    if (!graph_.is_fixed(v)) free.insert(v);
  }
  return run_stage("local", stamp, free, cfg_.local);
}

StageRecord Backend::global_optimize(double stamp) {
  std::set<VertexId> free;
  auto add = [&](VertexId v) {
    if (!graph_.is_fixed(v) && !graph_.is_marginalized(v)) free.insert(v);
  };
  for (const auto& [i, v] : graph_.keyframes()) add(v.id);
  for (const auto& [i, v] : graph_.walls()) add(v.id);
  for (const auto& [i, v] : graph_.rooms()) add(v.id);
  for (const auto& [i, v] : graph_.floors()) add(v.id);
  return run_stage("global", stamp, free, cfg_.global);
}

}  // namespace sgraph
