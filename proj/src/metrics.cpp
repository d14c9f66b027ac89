#include "sgraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Geometry>

#include "sgraph/error.hpp"
#include "sgraph/text.hpp"

namespace sgraph {

AteResult ate(const Trajectory& estimated, const Trajectory& ground_truth, Alignment alignment) {
  std::map<double, const Pose3*> truth;
  for (const StampedPose& p : ground_truth) truth.emplace(p.stamp, &p.pose);

  std::vector<Vec3> est, ref;
  for (const StampedPose& p : estimated) {
    const auto it = truth.find(p.stamp);
    if (it == truth.end()) continue;
    est.push_back(p.pose.translation());
    ref.push_back(it->second->translation());
  }
  if (est.size() < 2) {
    throw Error(ErrorCode::TooFewPoses, "only " + std::to_string(est.size()) + " stamps in common");
  }

  if (alignment == Alignment::RigidUmeyama) {
    Eigen::Matrix3Xd src(3, est.size()), dst(3, ref.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
      src.col(static_cast<Eigen::Index>(i)) = est[i];
      dst.col(static_cast<Eigen::Index>(i)) = ref[i];
    }
    const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
    for (Vec3& p : est) p = t.topLeftCorner<3, 3>() * p + t.topRightCorner<3, 1>();
  }

  std::vector<double> errors;
  errors.reserve(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) errors.push_back((est[i] - ref[i]).norm());

  AteResult r;
  r.alignment = alignment;
  r.num_poses = static_cast<int>(errors.size());
  double sum = 0.0, sq = 0.0;
  for (const double e : errors) {
    sum += e;
    sq += e * e;
    r.max = std::max(r.max, e);
  }
  r.mean = sum / static_cast<double>(errors.size());
  r.rmse = std::sqrt(sq / static_cast<double>(errors.size()));
  std::sort(errors.begin(), errors.end());
  const std::size_t n = errors.size();
  r.median = n % 2 == 1 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
  return r;
}

std::string format_pose_line(double stamp, const Pose3& pose) {
  std::string out;
  text::append_double(out, stamp);
  const Vec3& t = pose.translation();
  const Eigen::Quaterniond& q = pose.rotation();
  for (const double v : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) {
    out += ' ';
    text::append_double(out, v);
  }
  return out;
}

std::string write_trajectory(const Trajectory& t) {
  std::string out;
  for (const StampedPose& p : t) {
    out += format_pose_line(p.stamp, p.pose);
    out += '\n';
  }
  return out;
}

Trajectory read_trajectory(const std::string& contents) {
  Trajectory out;
  std::istringstream in(contents);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto tokens = text::split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    try {
      if (tokens.size() != 8) throw Error(ErrorCode::ParseError, "expected 8 fields, got " + std::to_string(tokens.size()));
      double v[8];
      for (std::size_t i = 0; i < 8; ++i) v[i] = text::parse_double(tokens[i], "pose field");
      const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
      const Vec3 t(v[1], v[2], v[3]);
      if (std::abs(q.norm() - 1.0) > 1e-6) throw Error(ErrorCode::ParseError, "quaternion is not unit length");
      out.push_back({v[0], std::abs(q.norm() - 1.0) <= 1e-9 ? Pose3::from_raw(q, t) : Pose3(q, t)});
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(number) + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace sgraph
