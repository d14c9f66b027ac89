#include "sgraph/compression.hpp"

#include <algorithm>
#include <map>
#include <queue>

#include <json.hpp>

namespace sgraph {

namespace {

struct Neighbor {
  VertexId id;
  double distance = 0.0;
};

// Pose-factor neighbors of k that are still active, closest first.
std::vector<Neighbor> keyframe_neighbors(const SGraph& g, VertexId k) {
  std::set<VertexId> ids;
  for (const FactorId fid : g.incident_factors(k)) {
    const Factor& f = g.factor(fid);
    if (!is_pose_factor(f.kind)) continue;
    const VertexId other = f.vertices[0] == k ? f.vertices[1] : f.vertices[0];
    if (!g.is_marginalized(other)) ids.insert(other);
  }
  const Vec3& here = g.keyframe(k).pose.translation();
  std::vector<Neighbor> out;
  for (const VertexId v : ids) out.push_back({v, (g.keyframe(v).pose.translation() - here).norm()});
  std::stable_sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
  return out;
}

bool pose_factor_between(const SGraph& g, VertexId a, VertexId b) {
  for (const FactorId fid : g.incident_factors(a)) {
    const Factor& f = g.factor(fid);
    if (!is_pose_factor(f.kind)) continue;
    if ((f.vertices[0] == a && f.vertices[1] == b) || (f.vertices[0] == b && f.vertices[1] == a)) return true;
  }
  return false;
}

// Measurement of the lowest-id pose factor joining `from` and `to`, oriented
// from → to.
Pose3 oriented_measurement(const std::vector<Factor>& removed, VertexId from, VertexId to) {
  for (const Factor& f : removed) {
    if (!is_pose_factor(f.kind)) continue;
    const Pose3& m = std::get<Pose3>(f.measurement);
    if (f.vertices[0] == from && f.vertices[1] == to) return m;
    if (f.vertices[0] == to && f.vertices[1] == from) return m.inverse();
  }
  throw Error(ErrorCode::InvalidArgument, "no eliminated edge joins " + to_string(from) + " and " + to_string(to));
}

// Active keyframes reachable from `start` over pose factors.
std::set<VertexId> reachable(const SGraph& g, VertexId start) {
  std::set<VertexId> seen{start};
  std::queue<VertexId> q;
  q.push(start);
  while (!q.empty()) {
    const VertexId v = q.front();
    q.pop();
    for (const FactorId fid : g.incident_factors(v)) {
      const Factor& f = g.factor(fid);
      if (!is_pose_factor(f.kind)) continue;
      const VertexId u = f.vertices[0] == v ? f.vertices[1] : f.vertices[0];
      if (!g.is_marginalized(u) && seen.insert(u).second) q.push(u);
    }
  }
  return seen;
}

FactorId add_reconnection(SGraph& g, VertexId a, VertexId b, const Pose3& m, const Eigen::MatrixXd& info) {
  Factor f;
  f.kind = FactorKind::Reconnection;
  f.vertices = {a, b};
  f.measurement = m;
  f.information = info;
  return g.add_factor(std::move(f));
}

// Marginalization proper; also returns the eliminated factors for the
// connectivity repair in compress().
CompressionReport eliminate(SGraph& g, VertexId k, ReconnectionSource source, std::vector<Neighbor>* neighbors_out,
                            std::vector<Factor>* removed_out) {
  CompressionReport report;
  if (k.kind != VertexKind::Keyframe || !g.contains(k)) {
    throw Error(ErrorCode::UnknownVertex, to_string(k) + " is not a keyframe of this graph");
  }
  report.components_before = g.connected_components_over_keyframes();
  if (g.is_marginalized(k)) {
    report.skipped.push_back({k, "AlreadyMarginalized"});
    report.components_after = report.components_before;
    return report;
  }
  if (g.is_fixed(k)) throw Error(ErrorCode::CannotMarginalizeFixed, to_string(k) + " is fixed");
  if (g.first_keyframe() == k) throw Error(ErrorCode::CannotMarginalizeFirst, to_string(k) + " is the first keyframe");

  const std::vector<Neighbor> neighbors = keyframe_neighbors(g, k);
  if (neighbors.empty()) throw Error(ErrorCode::IsolatedKeyframe, to_string(k) + " has no keyframe neighbor");

  const std::set<FactorId> incident = g.incident_factors(k);
  std::vector<Factor> removed;
  Eigen::MatrixXd summed = Eigen::MatrixXd::Zero(6, 6);
  for (const FactorId fid : incident) {
    const Factor& f = g.factor(fid);
    removed.push_back(f);
    report.removed_factors.push_back({f.id, f.kind});
    if (is_pose_factor(f.kind)) {
      summed += f.information;
    } else if (f.kind == FactorKind::PlaneObs) {
      ++report.dropped_plane_observations;
    }
  }
  for (const FactorId fid : incident) g.remove_factor(fid);
  g.set_marginalized(k);
  report.marginalized_keyframes.push_back(k);

  if (neighbors.size() >= 2) {
    VertexId a = neighbors[0].id, b = neighbors[1].id;
    if (b < a) std::swap(a, b);
    if (!pose_factor_between(g, a, b)) {
      Pose3 m;
      if (source == ReconnectionSource::Estimates) {
        m = between(g.keyframe(a).pose, g.keyframe(b).pose);
      } else {
        m = compose(oriented_measurement(removed, a, k), oriented_measurement(removed, k, b));
      }
      const FactorId id = add_reconnection(g, a, b, m, summed);
      report.added_reconnections.push_back({id, a, b, g.factor(id).information, false});
    }
  }
  report.components_after = g.connected_components_over_keyframes();
  if (neighbors_out) *neighbors_out = neighbors;
  if (removed_out) *removed_out = std::move(removed);
  return report;
}

nlohmann::ordered_json upper_triangle(const Eigen::MatrixXd& m) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = r; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

}  // namespace

void CompressionReport::append(const CompressionReport& other) {
  marginalized_keyframes.insert(marginalized_keyframes.end(), other.marginalized_keyframes.begin(),
                                other.marginalized_keyframes.end());
  removed_factors.insert(removed_factors.end(), other.removed_factors.begin(), other.removed_factors.end());
  added_reconnections.insert(added_reconnections.end(), other.added_reconnections.begin(),
                             other.added_reconnections.end());
  skipped.insert(skipped.end(), other.skipped.begin(), other.skipped.end());
  dropped_plane_observations += other.dropped_plane_observations;
}

CompressionReport marginalize_keyframe(SGraph& g, VertexId k, ReconnectionSource source) {
  return eliminate(g, k, source, nullptr, nullptr);
}

CompressionReport compress(SGraph& g, const std::set<VertexId>& to_marginalize, ReconnectionSource source) {
  CompressionReport report;
  report.components_before = g.connected_components_over_keyframes();

  std::vector<VertexId> order(to_marginalize.begin(), to_marginalize.end());
  std::stable_sort(order.begin(), order.end(), [&](VertexId a, VertexId b) {
    const bool ka = a.kind == VertexKind::Keyframe && g.contains(a);
    const bool kb = b.kind == VertexKind::Keyframe && g.contains(b);
    if (ka && kb) return g.keyframe(a).stamp < g.keyframe(b).stamp;
    return ka && !kb;
  });

  for (const VertexId k : order) {
    std::vector<Neighbor> neighbors;
    std::vector<Factor> removed;
    CompressionReport step;
    try {
      step = eliminate(g, k, source, &neighbors, &removed);
    } catch (const Error& e) {
      report.skipped.push_back({k, std::string(to_string(e.code()))});
      continue;
    }
    report.append(step);

    // A single edge between the closest two neighbors can strand the others
    // when k had three or more. Attach each stranded neighbor to its closest
    // connected former neighbor, carrying the information of its own
    // eliminated edge.
    if (neighbors.size() < 3) continue;
    for (std::size_t i = 2; i < neighbors.size(); ++i) {
      const VertexId lost = neighbors[i].id;
      const std::set<VertexId> component = reachable(g, neighbors[0].id);
      if (component.contains(lost)) continue;
      std::optional<VertexId> target;
      double best = 0.0;
      for (const Neighbor& n : neighbors) {
        if (!component.contains(n.id)) continue;
        const double d = (g.keyframe(n.id).pose.translation() - g.keyframe(lost).pose.translation()).norm();
        if (!target || d < best || (d == best && n.id < *target)) {
          target = n.id;
          best = d;
        }
      }
      Eigen::MatrixXd info = Eigen::MatrixXd::Zero(6, 6);
      for (const Factor& f : removed) {
        if (is_pose_factor(f.kind) && (f.vertices[0] == lost || f.vertices[1] == lost)) info += f.information;
      }
      VertexId a = *target, b = lost;
      if (b < a) std::swap(a, b);
      Pose3 m;
      if (source == ReconnectionSource::Estimates) {
        m = between(g.keyframe(a).pose, g.keyframe(b).pose);
      } else {
        m = compose(oriented_measurement(removed, a, k), oriented_measurement(removed, k, b));
      }
      const FactorId id = add_reconnection(g, a, b, m, info);
      report.added_reconnections.push_back({id, a, b, g.factor(id).information, true});
    }
  }
  report.components_after = g.connected_components_over_keyframes();
  return report;
}

std::string to_json(const CompressionReport& r) {
  nlohmann::ordered_json j;
  j["marginalized_keyframes"] = nlohmann::ordered_json::array();
  for (const VertexId v : r.marginalized_keyframes) j["marginalized_keyframes"].push_back(to_string(v));
  j["removed_factors"] = nlohmann::ordered_json::array();
  for (const RemovedFactor& f : r.removed_factors) {
    j["removed_factors"].push_back({{"id", f.id}, {"kind", to_string(f.kind)}});
  }
  j["added_reconnections"] = nlohmann::ordered_json::array();
  for (const AddedReconnection& a : r.added_reconnections) {
    nlohmann::ordered_json e;
    e["id"] = a.id;
    e["endpoints"] = {to_string(a.a), to_string(a.b)};
    e["information"] = upper_triangle(a.information);
    e["repair"] = a.repair;
    j["added_reconnections"].push_back(e);
  }
  j["skipped"] = nlohmann::ordered_json::array();
  for (const SkippedKeyframe& s : r.skipped) {
    j["skipped"].push_back({{"keyframe", to_string(s.keyframe)}, {"reason", s.reason}});
  }
  j["dropped_plane_observations"] = r.dropped_plane_observations;
  j["components_before"] = r.components_before;
  j["components_after"] = r.components_after;
  return j.dump();
}

}  // namespace sgraph
