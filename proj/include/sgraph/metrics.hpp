#pragma once

#include <string>
#include <vector>

#include "sgraph/manifold.hpp"

namespace sgraph {

enum class Alignment { None, RigidUmeyama };

struct AteResult {
  double rmse = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  int num_poses = 0;
  Alignment alignment = Alignment::RigidUmeyama;
};

struct StampedPose {
  double stamp = 0.0;
  Pose3 pose;
};
using Trajectory = std::vector<StampedPose>;

/// Translation error statistics over poses with equal stamps. RigidUmeyama
/// first applies the best-fit rotation and translation (no scale) carrying
/// the estimate onto the ground truth. Throws TooFewPoses below two matches.
AteResult ate(const Trajectory& estimated, const Trajectory& ground_truth, Alignment alignment);

/// "stamp tx ty tz qx qy qz qw" per line, shortest round-trip decimals.
/// Lines starting with '#' are comments.
std::string format_pose_line(double stamp, const Pose3& pose);
std::string write_trajectory(const Trajectory& t);
/// Throws ParseError with the line number.
Trajectory read_trajectory(const std::string& text);

}  // namespace sgraph
