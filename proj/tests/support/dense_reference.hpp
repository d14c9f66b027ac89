#pragma once

// A deliberately naive solver used as an oracle for the sparse optimizer:
// dense Levenberg–Marquardt with finite-difference Jacobians and a dense LDLT.

#include <map>
#include <random>
#include <set>
#include <vector>

#include "factor_fixtures.hpp"
#include "sgraph/graph.hpp"
#include "sgraph/optimizer.hpp"

namespace fixtures {

using namespace sgraph;

inline Eigen::Matrix4d mat(const Pose3& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = p.rotation().toRotationMatrix();
  m.topRightCorner<3, 1>() = p.translation();
  return m;
}

inline Factor pose_factor(FactorKind kind, VertexId a, VertexId b, const Pose3& m, const Eigen::MatrixXd& info) {
  Factor f;
  f.kind = kind;
  f.vertices = {a, b};
  f.measurement = m;
  f.information = info;
  return f;
}

inline void dense_reference_solve(SGraph& g, const std::vector<VertexId>& free, int iterations) {
  std::map<VertexId, int> off;
  int dim = 0;
  for (const VertexId v : free) {
    off[v] = dim;
    dim += tangent_dimension(v.kind);
  }
  auto chi2 = [&](const SGraph& s) {
    double c = 0;
    for (const auto& [id, f] : s.factors()) c += factor_chi2(f, s);
    return c;
  };
  double lambda = 1e-4;
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    for (const auto& [id, f] : g.factors()) {
      const Eigen::VectorXd r = residual(f, g);
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(r.size(), dim);
      for (const VertexId v : f.vertices) {
        if (!off.contains(v)) continue;
        for (int c = 0; c < tangent_dimension(v.kind); ++c) {
          Eigen::VectorXd d = Eigen::VectorXd::Zero(tangent_dimension(v.kind));
          d[c] = 1e-6;
          SGraph plus = g, minus = g;
          retract(plus, v, d);
          retract(minus, v, -d);
          j.col(off[v] + c) = (residual(f, plus) - residual(f, minus)) / 2e-6;
        }
      }
      h += j.transpose() * f.information * j;
      b += j.transpose() * f.information * r;
    }
    const double before = chi2(g);
    for (int tries = 0; tries < 30; ++tries) {
      const Eigen::VectorXd dx = (h + lambda * Eigen::MatrixXd::Identity(dim, dim)).ldlt().solve(-b);
      SGraph trial = g;
      for (const VertexId v : free) retract(trial, v, dx.segment(off[v], tangent_dimension(v.kind)));
      if (chi2(trial) < before) {
        g = trial;
        lambda *= 0.1;
        break;
      }
      lambda *= 10;
    }
  }
}

// Noisy 10-keyframe pose graph: an odometry chain plus up to five loop
// closures, K0 fixed. `free` receives K1..K9.
inline SGraph ten_vertex_graph(std::mt19937_64& rng, std::set<VertexId>& free) {
  std::vector<Pose3> truth{Pose3()};
  for (int i = 1; i < 10; ++i) truth.push_back(compose(truth.back(), exp(rand_tangent(rng, 0.3, 1.0))));
  SGraph g;
  for (int i = 0; i < 10; ++i) g.add_keyframe(i, compose(truth[i], exp(rand_tangent(rng, 0.05, 0.3))));
  auto noisy = [&](int a, int b) { return compose(between(truth[a], truth[b]), exp(rand_tangent(rng, 0.01, 0.05))); };
  for (int i = 0; i + 1 < 10; ++i) {
    g.add_factor(pose_factor(FactorKind::Odometry, keyframe_id(i), keyframe_id(i + 1), noisy(i, i + 1),
                             rand_info(rng, 6) * 10));
  }
  for (int e = 0; e < 5; ++e) {
    const int a = static_cast<int>(uni(rng, 0, 10)), b = static_cast<int>(uni(rng, 0, 10));
    if (a == b) continue;
    g.add_factor(pose_factor(FactorKind::LoopClosure, keyframe_id(a), keyframe_id(b), noisy(a, b),
                             rand_info(rng, 6) * 10));
  }
  g.set_fixed(keyframe_id(0), true);
  free.clear();
  for (int i = 1; i < 10; ++i) free.insert(keyframe_id(i));
  return g;
}

// Largest matrix-entry difference between the optimizer's result and the
// dense reference on one ten-vertex problem.
inline double ten_vertex_reference_gap(std::mt19937_64& rng) {
  std::set<VertexId> free;
  SGraph g = ten_vertex_graph(rng, free);
  SGraph ref = g;
  dense_reference_solve(ref, {free.begin(), free.end()}, 40);
  OptimizeConfig cfg;
  cfg.max_iterations = 100;
  cfg.convergence_tol = 1e-14;
  cfg.step_tol = 1e-12;
  optimize(g, free, cfg);
  double worst = 0.0;
  for (const VertexId v : free) {
    worst = std::max(worst, (mat(g.keyframe(v).pose) - mat(ref.keyframe(v).pose)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace fixtures
