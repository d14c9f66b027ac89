#include "sgraph/simulator.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "sgraph/error.hpp"
#include "sgraph/room_local.hpp"
#include "sgraph/text.hpp"

namespace sgraph {

namespace {

using Cell = std::pair<int, int>;  // (row, col)

// A closed walk over the grid in which consecutive cells (and the last and
// first) are adjacent.
std::vector<Cell> tour(int rows, int cols) {
  std::vector<Cell> t;
  if (rows == 1 && cols == 1) return {{0, 0}};
  if (rows >= 2 && cols >= 2 && (cols == 2 || rows % 2 == 0)) {
    for (int c = 0; c < cols; ++c) t.emplace_back(0, c);
    for (int r = 1; r < rows; ++r) {
      if (r % 2 == 1) {
        for (int c = cols - 1; c >= 1; --c) t.emplace_back(r, c);
      } else {
        for (int c = 1; c < cols; ++c) t.emplace_back(r, c);
      }
    }
    for (int r = rows - 1; r >= 1; --r) t.emplace_back(r, 0);
    return t;
  }
  if (rows >= 2 && cols >= 2 && (rows == 2 || cols % 2 == 0)) {
    for (int r = 0; r < rows; ++r) t.emplace_back(r, 0);
    for (int c = 1; c < cols; ++c) {
      if (c % 2 == 1) {
        for (int r = rows - 1; r >= 1; --r) t.emplace_back(r, c);
      } else {
        for (int r = 1; r < rows; ++r) t.emplace_back(r, c);
      }
    }
    for (int c = cols - 1; c >= 1; --c) t.emplace_back(0, c);
    return t;
  }
  // No Hamiltonian cycle: serpentine there and back.
  for (int r = 0; r < rows; ++r) {
    for (int i = 0; i < cols; ++i) t.emplace_back(r, r % 2 == 0 ? i : cols - 1 - i);
  }
  const std::size_t n = t.size();
  for (std::size_t i = n - 2; i >= 1; --i) t.push_back(t[i]);
  return t;
}

// Door point on room a's wall toward the adjacent room b.
Vec2 door(const GtRoom& a, const GtRoom& b) {
  if (b.col > a.col) return {a.center.x() + 0.5 * a.size.x(), a.center.y()};
  if (b.col < a.col) return {a.center.x() - 0.5 * a.size.x(), a.center.y()};
  if (b.row > a.row) return {a.center.x(), a.center.y() + 0.5 * a.size.y()};
  return {a.center.x(), a.center.y() - 0.5 * a.size.y()};
}

struct Polyline {
  std::vector<Vec2> points;
  std::vector<int> lap;  // lap of the segment ending at each point

  void add(const Vec2& p, int l) {
    if (!points.empty() && (points.back() - p).norm() < 1e-12) return;
    points.push_back(p);
    lap.push_back(l);
  }
};

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Proper crossing of segments pq and ab (touching does not count).
bool segments_cross(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  const double d1 = cross2(q - p, a - p), d2 = cross2(q - p, b - p);
  const double d3 = cross2(b - a, p - a), d4 = cross2(b - a, q - a);
  return d1 * d2 < 0.0 && d3 * d4 < 0.0;
}

Mat6 diag_information(const Vec6& sigma) {
  Mat6 m = Mat6::Zero();
  for (int i = 0; i < 6; ++i) m(i, i) = sigma[i] > 0.0 ? 1.0 / (sigma[i] * sigma[i]) : 1e8;
  return m;
}

Mat3 diag_information(const Vec3& sigma) {
  Mat3 m = Mat3::Zero();
  for (int i = 0; i < 3; ++i) m(i, i) = sigma[i] > 0.0 ? 1.0 / (sigma[i] * sigma[i]) : 1e8;
  return m;
}

}  // namespace

double NormalSource::uniform() {
  return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
}

double NormalSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

void WorldConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (rows < 1 || cols < 1) bad("rows and cols must be >= 1");
  if (!(room_size_min > 0.0) || !(room_size_max >= room_size_min)) bad("room sizes must satisfy 0 < min <= max");
  if (!(corridor_width >= 0.0) || !(cell_size >= 0.0)) bad("corridor_width and cell_size must be >= 0");
  if (!(spacing > 0.0)) bad("spacing must be > 0");
  for (int i = 0; i < 6; ++i) {
    if (!(odometry_sigma[i] >= 0.0) || !std::isfinite(odometry_sigma[i])) bad("odometry sigmas must be >= 0");
  }
  for (int i = 0; i < 3; ++i) {
    if (!(plane_sigma[i] >= 0.0) || !std::isfinite(plane_sigma[i])) bad("plane sigmas must be >= 0");
  }
  if (!(plane_range > 0.0)) bad("plane_range must be > 0");
  if (!(revisit_radius > 0.0)) bad("revisit_radius must be > 0");
  if (laps < 1) bad("laps must be >= 1");
  if (!(room_loop_standoff > 0.0) || !(center_jitter >= 0.0)) bad("room loop parameters must be positive");
  if (loop_min_age < 1 || loop_min_gap < 1) bad("loop_min_age and loop_min_gap must be >= 1");
}

GroundTruth generate_world(const WorldConfig& cfg) {
  cfg.validate();
  const double pitch = cfg.cell_size > 0.0 ? cfg.cell_size : cfg.room_size_max + cfg.corridor_width;
  if (!(pitch > cfg.room_size_max)) {
    throw Error(ErrorCode::InfeasibleLayout, "rooms of size " + text::format_double(cfg.room_size_max) +
                                                 " do not fit a grid cell of " + text::format_double(pitch));
  }
  const double margin = cfg.room_loop_standoff + cfg.center_jitter;
  if (!(cfg.room_size_min > 2.0 * margin + 0.5)) {
    throw Error(ErrorCode::InfeasibleLayout, "rooms are too small for the in-room loop");
  }

  NormalSource rng(cfg.seed);
  GroundTruth gt;
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      GtRoom room;
      room.key = static_cast<std::uint64_t>(r * cfg.cols + c);
      room.row = r;
      room.col = c;
      room.center = Vec2(c * pitch, r * pitch);
      const double w = rng.uniform(cfg.room_size_min, cfg.room_size_max);
      const double h = rng.uniform(cfg.room_size_min, cfg.room_size_max);
      room.size = Vec2(w, h);
      const double cx = room.center.x(), cy = room.center.y();
      const std::uint64_t base = 4 * room.key;
      room.wall_keys = {base, base + 1, base + 2, base + 3};
      gt.walls.push_back({base, PlaneParams(Vec3::UnitX(), cx + w / 2), {cx + w / 2, cy - h / 2}, {cx + w / 2, cy + h / 2}});
      gt.walls.push_back({base + 1, PlaneParams(-Vec3::UnitX(), -(cx - w / 2)), {cx - w / 2, cy - h / 2}, {cx - w / 2, cy + h / 2}});
      gt.walls.push_back({base + 2, PlaneParams(Vec3::UnitY(), cy + h / 2), {cx - w / 2, cy + h / 2}, {cx + w / 2, cy + h / 2}});
      gt.walls.push_back({base + 3, PlaneParams(-Vec3::UnitY(), -(cy - h / 2)), {cx - w / 2, cy - h / 2}, {cx + w / 2, cy - h / 2}});
      gt.rooms.push_back(room);
      gt.floor_center += room.center;
    }
  }
  gt.floor_center /= static_cast<double>(gt.rooms.size());

  const std::vector<Cell> order = tour(cfg.rows, cfg.cols);
  auto room_at = [&](const Cell& c) -> const GtRoom& {
    return gt.rooms[static_cast<std::size_t>(c.first * cfg.cols + c.second)];
  };

  Polyline path;
  path.add(room_at(order[0]).center, 0);
  const std::size_t n = order.size();
  for (int lap = 0; lap < cfg.laps; ++lap) {
    for (std::size_t v = 0; v < n; ++v) {
      const GtRoom& room = room_at(order[v]);
      const GtRoom& prev = room_at(order[(v + n - 1) % n]);
      const GtRoom& next = room_at(order[(v + 1) % n]);
      const bool first_visit = lap == 0 && v == 0;
      if (!first_visit && &prev != &room) {
        path.add(door(prev, room), lap);
        path.add(door(room, prev), lap);
      }
      const Vec2 jitter(rng.uniform(-cfg.center_jitter, cfg.center_jitter),
                        rng.uniform(-cfg.center_jitter, cfg.center_jitter));
      const Vec2 c = room.center + jitter;
      const double hx = 0.5 * room.size.x() - cfg.room_loop_standoff;
      const double hy = 0.5 * room.size.y() - cfg.room_loop_standoff;
      const Vec2 corners[4] = {{c.x() - hx, c.y() - hy}, {c.x() + hx, c.y() - hy}, {c.x() + hx, c.y() + hy},
                               {c.x() - hx, c.y() + hy}};
      const Vec2 entry = path.points.back();
      int start = 0;
      for (int i = 1; i < 4; ++i) {
        if ((corners[i] - entry).norm() < (corners[start] - entry).norm()) start = i;
      }
      for (int i = 0; i <= 4; ++i) path.add(corners[(start + i) % 4], lap);
      const bool last_visit = lap == cfg.laps - 1 && v == n - 1;
      if (&next != &room) path.add(door(room, next), lap);
      if (last_visit) {
        // Come home to the start so the run ends on a revisit.
        const GtRoom& home = room_at(order[0]);
        if (&home != &room) path.add(door(home, room), lap);
        path.add(home.center, lap);
      }
    }
  }

  // Samples exactly `spacing` apart in straight-line distance.
  Vec2 p = path.points[0];
  std::size_t seg = 0;
  double t = 0.0;
  std::vector<Vec2> samples{p};
  std::vector<int> laps{0};
  const double s2 = cfg.spacing * cfg.spacing;
  while (true) {
    bool found = false;
    for (std::size_t k = seg; k + 1 < path.points.size() && !found; ++k) {
      const Vec2 a = path.points[k], d = path.points[k + 1] - a;
      const double qa = d.squaredNorm();
      const double qb = 2.0 * d.dot(a - p);
      const double qc = (a - p).squaredNorm() - s2;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc < 0.0) continue;
      const double root = std::sqrt(disc);
      const double lo = k == seg ? t : 0.0;
      for (const double s : {(-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)}) {
        if (s > lo && s <= 1.0) {
          p = a + s * d;
          seg = k;
          t = s;
          found = true;
          samples.push_back(p);
          laps.push_back(path.lap[k + 1]);
          break;
        }
      }
    }
    if (!found) break;
  }

  double yaw = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0) {
      const Vec2 d = samples[i] - samples[i - 1];
      yaw = std::atan2(d.y(), d.x());
    }
    const Vec3 pos(samples[i].x(), samples[i].y(), 0.0);
    gt.stamps.push_back(static_cast<double>(i) * cfg.spacing);
    gt.poses.push_back(i == 0 ? Pose3(Mat3::Identity(), pos)
                              : Pose3(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())), pos));
    gt.lap.push_back(laps[i]);
  }
  return gt;
}

bool wall_visible(const GroundTruth& gt, const GtWall& wall, const Vec3& position, double range) {
  const double signed_dist = wall.plane.signed_distance(position);
  if (!(signed_dist < 0.0) || -signed_dist > range) return false;
  const Vec3 foot3 = position - wall.plane.normal * signed_dist;
  const Vec2 p(position.x(), position.y()), foot(foot3.x(), foot3.y());
  const Vec2 ab = wall.b - wall.a;
  const double s = (foot - wall.a).dot(ab) / ab.squaredNorm();
  if (s < 0.0 || s > 1.0) return false;
  for (const GtWall& other : gt.walls) {
    if (other.key == wall.key) continue;
    if (segments_cross(p, foot, other.a, other.b)) return false;
  }
  return true;
}

std::vector<Event> generate_events(const GroundTruth& gt, const WorldConfig& cfg) {
  cfg.validate();
  NormalSource rng(cfg.seed + 0x9E3779B97F4A7C15ull);
  const Mat6 odom_info = diag_information(cfg.odometry_sigma);
  const Mat3 plane_info = diag_information(cfg.plane_sigma);
  auto pose_noise = [&] {
    Tangent6 xi;
    for (int i = 0; i < 6; ++i) xi[i] = cfg.odometry_sigma[i] * rng.normal();
    return exp(xi);
  };

  std::vector<Event> events;
  std::vector<std::array<bool, 4>> seen(gt.rooms.size());
  std::vector<bool> detected(gt.rooms.size(), false);
  std::optional<std::size_t> last_loop;

  for (std::size_t i = 0; i < gt.poses.size(); ++i) {
    const Pose3& pose = gt.poses[i];
    OdometryEvent odo;
    odo.stamp = gt.stamps[i];
    odo.information = odom_info;
    if (i > 0) odo.rel_pose = compose(between(gt.poses[i - 1], pose), pose_noise());
    events.emplace_back(odo);
    events.emplace_back(GroundTruthEvent{gt.stamps[i], pose});

    std::vector<std::uint64_t> visible;
    for (const GtWall& w : gt.walls) {
      if (!wall_visible(gt, w, pose.translation(), cfg.plane_range)) continue;
      visible.push_back(w.key);
      Vec3 delta;
      for (int k = 0; k < 3; ++k) delta[k] = cfg.plane_sigma[k] * rng.normal();
      events.emplace_back(PlaneObsEvent{gt.stamps[i], w.key, plane_retract(transform_plane(pose, w.plane), delta),
                                        plane_info});
    }

    for (const GtRoom& room : gt.rooms) {
      std::array<PlaneParams, 4> planes;
      for (std::size_t k = 0; k < 4; ++k) planes[k] = gt.walls[room.wall_keys[k]].plane;
      if (!keyframe_in_room(pose.translation(), planes)) continue;
      auto& s = seen[room.key];
      for (const std::uint64_t key : visible) {
        for (std::size_t k = 0; k < 4; ++k) s[k] = s[k] || room.wall_keys[k] == key;
      }
      if (!detected[room.key] && s[0] && s[1] && s[2] && s[3]) {
        detected[room.key] = true;
        events.emplace_back(RoomDetectedEvent{room.key, room.wall_keys, gt.floor_key});
      }
    }

    if (!last_loop || i - *last_loop >= static_cast<std::size_t>(cfg.loop_min_gap)) {
      std::optional<std::size_t> partner;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j + static_cast<std::size_t>(cfg.loop_min_age) <= i; ++j) {
        const double d = (gt.poses[j].translation() - pose.translation()).norm();
        if (d <= cfg.revisit_radius && d < best) {
          best = d;
          partner = j;
        }
      }
      if (partner) {
        last_loop = i;
        LoopClosureEvent lc;
        lc.stamp_a = gt.stamps[*partner];
        lc.stamp_b = gt.stamps[i];
        lc.rel_pose = compose(between(gt.poses[*partner], pose), pose_noise());
        lc.information = odom_info;
        events.emplace_back(lc);
      }
    }
  }
  return events;
}

std::string serialize_ground_truth(const GroundTruth& gt) {
  std::string out;
  auto num = [&](double v) {
    out += ' ';
    text::append_double(out, v);
  };
  for (const GtWall& w : gt.walls) {
    out += "wall " + std::to_string(w.key);
    num(w.plane.normal.x());
    num(w.plane.normal.y());
    num(w.plane.normal.z());
    num(w.plane.distance);
    num(w.a.x());
    num(w.a.y());
    num(w.b.x());
    num(w.b.y());
    out += '\n';
  }
  for (const GtRoom& r : gt.rooms) {
    out += "room " + std::to_string(r.key) + ' ' + std::to_string(r.row) + ' ' + std::to_string(r.col);
    num(r.center.x());
    num(r.center.y());
    num(r.size.x());
    num(r.size.y());
    for (const std::uint64_t k : r.wall_keys) out += ' ' + std::to_string(k);
    out += '\n';
  }
  out += "floor " + std::to_string(gt.floor_key);
  num(gt.floor_center.x());
  num(gt.floor_center.y());
  out += '\n';
  for (std::size_t i = 0; i < gt.poses.size(); ++i) {
    out += "pose " + std::to_string(gt.lap[i]);
    num(gt.stamps[i]);
    const Vec3& t = gt.poses[i].translation();
    const Eigen::Quaterniond& q = gt.poses[i].rotation();
    for (const double v : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) num(v);
    out += '\n';
  }
  return out;
}

}  // namespace sgraph
