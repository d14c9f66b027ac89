#pragma once

#include <functional>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "sgraph/graph.hpp"

namespace sgraph {

struct OptimizeConfig {
  int max_iterations = 20;
  double initial_lambda = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  /// Stop once an accepted step lowers chi² by less than this fraction.
  double convergence_tol = 1e-6;
  /// Stop once the tangent-space step norm falls below this.
  double step_tol = 1e-8;

  /// Throws InvalidArgument.
  void validate() const;
};

struct OptimizeStats {
  int iterations = 0;
  double chi2_initial = 0.0;
  double chi2_final = 0.0;
  double wall_time = 0.0;  // seconds
  int num_free_vertices = 0;
  int num_factors = 0;
  bool converged = false;
};

/// Tangent dimension of a vertex kind: keyframe 6, wall 3, room 2, floor 2.
int tangent_dimension(VertexKind kind);

/// Moves a vertex estimate along its tangent coordinates. Keyframes use the
/// right perturbation pose·exp(δ), walls plane_retract, rooms and floors
/// plain addition.
void retract(SGraph& g, VertexId v, const Eigen::VectorXd& delta);

/// Residual of a factor at the current estimates.
///   pose factors: log(m⁻¹ · between(pose_a, pose_b))
///   PlaneObs:     plane_error(world plane in keyframe frame, observation)
///   RoomWalls:    center − midpoints of the x pair and y pair
///   FloorRooms:   center − mean of room centers
Eigen::VectorXd residual(const Factor& f, const SGraph& g);

/// Weighted squared error rᵀ·Ω·r.
double factor_chi2(const Factor& f, const SGraph& g);

struct JacobianBlock {
  VertexId vertex;
  Eigen::MatrixXd block;  // residual_dim × tangent_dim
};

/// ∂r/∂δ for every vertex of the factor accepted by `is_free`, in factor
/// vertex order.
std::vector<JacobianBlock> jacobian(const Factor& f, const SGraph& g,
                                    const std::function<bool(VertexId)>& is_free);
/// Same, treating every non-fixed, non-marginalized vertex as free.
std::vector<JacobianBlock> jacobian(const Factor& f, const SGraph& g);

/// Levenberg–Marquardt over the vertices in `free`, with sparse normal
/// equations and sparse Cholesky. Every factor touching a free vertex takes
/// part; all other vertices stay constant and are left bit-identical.
/// Errors: InvalidArgument (free vertex fixed or marginalized),
/// UnknownVertex, EmptyProblem, SingularNormalEquations.
OptimizeStats optimize(SGraph& g, const std::set<VertexId>& free, const OptimizeConfig& cfg);

}  // namespace sgraph
