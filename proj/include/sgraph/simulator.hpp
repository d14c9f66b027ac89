#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sgraph/events.hpp"
#include "sgraph/manifold.hpp"

namespace sgraph {

struct WorldConfig {
  std::uint64_t seed = 1;
  int rows = 3;
  int cols = 2;
  double room_size_min = 6.0;
  double room_size_max = 8.0;
  double corridor_width = 2.0;
  /// Grid pitch; 0 means room_size_max + corridor_width.
  double cell_size = 0.0;
  double spacing = 0.5;
  /// Tangent order: rotation x y z, translation x y z.
  Vec6 odometry_sigma = (Vec6() << 0.002, 0.002, 0.002, 0.01, 0.01, 0.01).finished();
  /// Normal tangent directions (rad) and distance (m).
  Vec3 plane_sigma = Vec3::Constant(0.01);
  double plane_range = 2.5;
  double revisit_radius = 1.0;
  int laps = 2;
  /// Distance kept between the in-room loop and the walls.
  double room_loop_standoff = 2.1;
  /// Per-visit random offset of the in-room loop center.
  double center_jitter = 0.3;
  /// Minimum keyframe age of a loop-closure partner.
  int loop_min_age = 20;
  /// Minimum number of keyframes between two emitted loop closures.
  int loop_min_gap = 15;

  /// Throws InvalidArgument.
  void validate() const;
};

struct GtWall {
  std::uint64_t key = 0;
  PlaneParams plane;  // normal points away from the room interior
  // Extent along the wall in the horizontal plane: the segment from a to b.
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
};

struct GtRoom {
  std::uint64_t key = 0;
  int row = 0;
  int col = 0;
  Vec2 center = Vec2::Zero();
  Vec2 size = Vec2::Zero();
  std::array<std::uint64_t, 4> wall_keys{};  // +x, -x, +y, -y
};

struct GroundTruth {
  std::vector<GtWall> walls;  // indexed by key
  std::vector<GtRoom> rooms;  // indexed by key
  std::uint64_t floor_key = 0;
  Vec2 floor_center = Vec2::Zero();
  std::vector<double> stamps;
  std::vector<Pose3> poses;
  std::vector<int> lap;  // lap index of each keyframe
};

/// Deterministic normal deviates from std::mt19937_64 through the Box–Muller
/// transform, so streams do not depend on the standard library's
/// distribution implementations.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on (0, 1]: ((x >> 11) + 1) · 2⁻⁵³.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal; deviates are produced in pairs (cosine branch first).
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Errors: InfeasibleLayout, InvalidArgument.
GroundTruth generate_world(const WorldConfig& cfg);
std::vector<Event> generate_events(const GroundTruth& gt, const WorldConfig& cfg);

/// Keyframe-to-wall visibility: the robot is on the interior side, within
/// range, its perpendicular foot lies on the wall segment and no other wall
/// segment crosses the line of sight.
bool wall_visible(const GroundTruth& gt, const GtWall& wall, const Vec3& position, double range);

/// Canonical text dump used for byte comparisons.
std::string serialize_ground_truth(const GroundTruth& gt);

}  // namespace sgraph
