#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgraph/compression.hpp"
#include "sgraph/events.hpp"
#include "sgraph/graph.hpp"
#include "sgraph/optimizer.hpp"

namespace sgraph {

enum class PipelineMode { Full, Compressed };

std::string to_string(PipelineMode mode);
/// "full" or "compressed"; throws ParseError.
PipelineMode parse_mode(const std::string& text);

struct BackendConfig {
  int window_size = 10;
  int local_trigger_every = 1;
  PipelineMode mode = PipelineMode::Compressed;
  OptimizeConfig local;
  OptimizeConfig global;
  OptimizeConfig room_local;
  ReconnectionSource reconnection_source = ReconnectionSource::Estimates;
  /// Weights of the room-to-walls and floor-to-rooms constraints.
  double room_information = 100.0;
  double floor_information = 1.0;
  /// Each optimization is additionally re-run this many times minus one on a
  /// copy of the graph; the reported wall time is the minimum.
  int timing_repeats = 1;

  /// Throws InvalidArgument.
  void validate() const;
};

struct StageRecord {
  std::string stage;  // room_local, local, global, compression
  double stamp = 0.0;
  double wall_time_ms = 0.0;
  OptimizeStats stats;
  std::optional<CompressionReport> compression;
  std::vector<VertexId> free_vertices;
};

/// JSON object on one line (no trailing newline).
std::string to_json_line(const StageRecord& r);

struct BackendCounters {
  int rooms_detected = 0;
  int rooms_without_inside_keyframes = 0;
  int loop_closures_added = 0;
  int loop_closures_retargeted = 0;
  int loop_closures_skipped = 0;
  int keyframes_withheld = 0;  // newest keyframe kept out of a compression
  /// Per processed room detection: inside keyframes and how many were
  /// excluded from marginalization (kept, fixed, first, newest).
  std::vector<std::pair<int, int>> room_inside_excluded;
};

class Backend {
 public:
  explicit Backend(BackendConfig cfg);

  /// Errors: OutOfOrderEvent, UnknownWallKey, and anything raised by the
  /// optimization stages.
  std::vector<StageRecord> ingest(const Event& e);

  /// Windowed optimization over the last N active keyframes.
  StageRecord local_optimize(double stamp);
  /// Optimization of every active vertex with only the first keyframe fixed.
  StageRecord global_optimize(double stamp);

  const SGraph& graph() const { return graph_; }
  const BackendConfig& config() const { return cfg_; }
  const BackendCounters& counters() const { return counters_; }
  const std::vector<std::pair<double, Pose3>>& ground_truth() const { return ground_truth_; }

 private:
  std::vector<StageRecord> on_odometry(const OdometryEvent& e);
  std::vector<StageRecord> on_plane(const PlaneObsEvent& e);
  std::vector<StageRecord> on_room(const RoomDetectedEvent& e);
  std::vector<StageRecord> on_loop(const LoopClosureEvent& e);

  StageRecord run_stage(const std::string& stage, double stamp, const std::set<VertexId>& free,
                        const OptimizeConfig& cfg);
  VertexId keyframe_near(double stamp) const;
  std::optional<VertexId> active_near(VertexId k) const;
  /// Active keyframe standing in for k and the pose of k in its frame.
  std::optional<std::pair<VertexId, Pose3>> resolve(VertexId k) const;
  double last_stamp() const;
  /// Summed odometry covariance of the steps between two keyframe stamps.
  Mat6 span_covariance(double s0, double s1) const;

  BackendConfig cfg_;
  SGraph graph_;
  std::map<double, VertexId> stamp_index_;
  std::map<std::uint64_t, VertexId> walls_;
  std::map<std::uint64_t, VertexId> rooms_;
  std::map<std::uint64_t, VertexId> floors_;
  std::map<VertexId, FactorId> floor_factor_;
  std::map<VertexId, VertexId> kept_keyframe_;  // room → designated keyframe
  // Marginalized keyframe → (anchor keyframe, relative pose) at the time of
  // marginalization.
  std::map<VertexId, std::pair<VertexId, Pose3>> anchor_of_;
  std::vector<std::pair<double, Pose3>> ground_truth_;
  std::map<double, Mat6> step_covariance_;  // keyed by the stamp the step ends at
  BackendCounters counters_;
  int keyframes_since_local_ = 0;
};

}  // namespace sgraph
