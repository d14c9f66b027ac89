#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgraph/backend.hpp"
#include "sgraph/events.hpp"
#include "sgraph/metrics.hpp"
#include "sgraph/simulator.hpp"

namespace sgraph {

struct HarnessConfig {
  WorldConfig world;
  BackendConfig backend;
};

/// Flat "key = value" text with '#' comments. Optimizer keys take an optional
/// "local.", "global." or "room_local." prefix; without one they apply to all
/// three stages. Unknown keys and malformed values raise ParseError with the
/// line number.
HarnessConfig parse_config(const std::string& text, HarnessConfig base = {});
/// Every recognized key with its current value, one per line.
std::string describe_config(const HarnessConfig& cfg);

struct StageSummary {
  int count = 0;
  double mean_ms = 0.0;
  double max_ms = 0.0;
  double total_ms = 0.0;
};

struct PipelineResult {
  PipelineMode mode = PipelineMode::Compressed;
  SGraph graph;
  std::vector<StageRecord> records;
  BackendCounters counters;
  Trajectory ground_truth;
  Trajectory active_trajectory;  // non-marginalized keyframes
  Trajectory full_trajectory;    // every keyframe
  std::optional<AteResult> ate_active;
  std::optional<AteResult> ate_all;

  std::map<std::string, StageSummary> stage_summary() const;
  int marginalized_count() const;
  /// Trajectory file: active keyframes as pose lines, marginalized ones as
  /// "# marginalized ..." comment lines, in stamp order.
  std::string trajectory_text() const;
  /// JSON lines, one per stage record.
  std::string report_text() const;
};

/// Replays the events through a fresh backend. Backend failures are
/// rethrown with the 1-based event index prepended.
PipelineResult run_pipeline(const std::vector<Event>& events, const BackendConfig& cfg);

struct CompareReport {
  std::string dataset_checksum;
  PipelineResult full;
  PipelineResult compressed;

  /// (full − compressed) / full × 100 over mean global-optimization time.
  double global_time_reduction_pct() const;
  /// Same over the sum of every stage's wall time.
  double total_time_reduction_pct() const;
  /// (compressed − full) / full × 100 over ATE RMSE of active keyframes.
  std::optional<double> ate_relative_diff_pct() const;

  /// Keys holding wall-time-derived values all contain "time".
  std::string to_json() const;
  std::string to_table() const;
};

/// Runs both modes on the same stream. `dataset_text` is checksummed as is.
CompareReport compare(const std::string& dataset_text, const BackendConfig& cfg);

/// Accepts a plain trajectory file or a simulator ground-truth file, whose
/// "pose <lap> <stamp> ..." lines are read and other records skipped.
Trajectory read_any_trajectory(const std::string& text);

/// Writes keyframes, walls, rooms and edges CSV files. A prefix ending in
/// '/' names a directory; otherwise files are "<prefix>_<name>.csv".
/// Returns the written paths.
std::vector<std::string> export_plot_data(const SGraph& g, const std::string& prefix);

}  // namespace sgraph
