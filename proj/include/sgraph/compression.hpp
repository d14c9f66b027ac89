#pragma once

#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sgraph/error.hpp"
#include "sgraph/graph.hpp"

namespace sgraph {

/// Where the measurement of a reconnection edge comes from.
enum class ReconnectionSource {
  Estimates,         // between() of the current endpoint estimates
  ComposedOdometry,  // chained measurements of the two eliminated edges
};

struct RemovedFactor {
  FactorId id = 0;
  FactorKind kind = FactorKind::Odometry;
};

struct AddedReconnection {
  FactorId id = 0;
  VertexId a;
  VertexId b;
  Eigen::MatrixXd information;
  // Extra edge added by compress() to keep a former neighbor attached.
  bool repair = false;
};

struct SkippedKeyframe {
  VertexId keyframe;
  std::string reason;  // error code name, or "AlreadyMarginalized"
};

struct CompressionReport {
  std::vector<VertexId> marginalized_keyframes;
  std::vector<RemovedFactor> removed_factors;
  std::vector<AddedReconnection> added_reconnections;
  std::vector<SkippedKeyframe> skipped;
  int dropped_plane_observations = 0;
  int components_before = 0;
  int components_after = 0;

  void append(const CompressionReport& other);
};

/// Marginalizes one keyframe: removes all its factors, flags it and joins its
/// two closest non-marginalized keyframe neighbors with a Reconnection edge
/// carrying the summed information of the removed pose edges.
/// Errors: UnknownVertex, CannotMarginalizeFixed, CannotMarginalizeFirst,
/// IsolatedKeyframe. An already marginalized keyframe is a recorded no-op.
CompressionReport marginalize_keyframe(SGraph& g, VertexId k,
                                       ReconnectionSource source = ReconnectionSource::Estimates);

/// Marginalizes the set in ascending stamp order. Per-keyframe errors are
/// recorded and processing continues.
CompressionReport compress(SGraph& g, const std::set<VertexId>& to_marginalize,
                           ReconnectionSource source = ReconnectionSource::Estimates);

/// One JSON object.
std::string to_json(const CompressionReport& report);

}  // namespace sgraph
