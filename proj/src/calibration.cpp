#include "evrf/calibration.hpp"

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "evrf/errors.hpp"
#include "evrf/trainer.hpp"

namespace evrf {

void CalibObservation::validate() const {
  if (poses.size() < 3)
    throw DomainError("calibration: need at least 3 views");
  for (const Pose& p : poses)
    if (!p.orthonormal(1e-6))
      throw DomainError("calibration: non-orthonormal rotation");
  // Non-collinearity of the camera centres.
  const Vec3 d = (poses[1].translation - poses[0].translation).normalized();
  bool collinear = true;
  for (std::size_t i = 2; i < poses.size(); ++i) {
    const Vec3 v = poses[i].translation - poses[0].translation;
    if (v.cross(d).norm() > 1e-9 * (1.0 + v.norm())) {
      collinear = false;
      break;
    }
  }
  if (collinear) throw DomainError("calibration: camera centres collinear");
}

Vec3 corrected_principal_direction(const Pose& pose, double alpha) {
  // rot_x(-alpha) applied in the camera frame, acting on the +z axis.
  const Vec3 dir_cam(0.0, std::sin(alpha), std::cos(alpha));
  return pose.rotation * dir_cam;
}

namespace {

double point_line_distance_sq(const Vec3& point, const Vec3& origin,
                              const Vec3& direction) {
  const Vec3 v = point - origin;
  const double along = v.dot(direction);
  return (v - along * direction).squaredNorm();
}

struct PositionPlane {
  Vec3 centroid = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

// Best-fit plane of the camera centres (smallest covariance direction).
PositionPlane fit_position_plane(const CalibObservation& obs) {
  PositionPlane plane;
  for (const Pose& p : obs.poses) plane.centroid += p.translation;
  plane.centroid /= static_cast<double>(obs.poses.size());
  Mat3 cov = Mat3::Zero();
  for (const Pose& p : obs.poses) {
    const Vec3 d = p.translation - plane.centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  plane.normal = eig.eigenvectors().col(0).normalized();
  return plane;
}

double objective(const CalibObservation& obs, const PositionPlane& plane,
                 const double* p) {
  // p = (alpha, cx, cy, cz, radius). The centre is tied to the plane of
  // the camera positions; without that term any point on the rotation
  // axis solves the symmetric problem (rays tilted by a common angle all
  // meet on the axis), leaving alpha unconstrained.
  const double alpha = p[0];
  const Vec3 center(p[1], p[2], p[3]);
  const double radius = p[4];
  double total = 0;
  for (const Pose& pose : obs.poses) {
    const Vec3 dir = corrected_principal_direction(pose, alpha);
    total += point_line_distance_sq(center, pose.translation, dir);
    const double d = (pose.translation - center).norm() - radius;
    total += d * d;
    const double off = plane.normal.dot(center - plane.centroid);
    total += off * off;
  }
  return total;
}

} // namespace

CalibSolution default_init(const CalibObservation& obs) {
  obs.validate();
  Vec3 centroid = Vec3::Zero();
  for (const Pose& p : obs.poses) centroid += p.translation;
  centroid /= static_cast<double>(obs.poses.size());
  double radius = 0;
  for (const Pose& p : obs.poses)
    radius += (p.translation - centroid).norm();
  radius /= static_cast<double>(obs.poses.size());
  CalibSolution sol;
  sol.center = centroid;
  sol.radius = radius;
  sol.tilt_alpha = 0;
  return sol;
}

double rms_miss_distance(const CalibObservation& obs,
                         const CalibSolution& sol) {
  double total = 0;
  for (const Pose& pose : obs.poses) {
    const Vec3 dir = corrected_principal_direction(pose, sol.tilt_alpha);
    total += point_line_distance_sq(sol.center, pose.translation, dir);
  }
  return std::sqrt(total / static_cast<double>(obs.poses.size()));
}

CalibSolution calibrate(const CalibObservation& obs,
                        const CalibSolution& init, const CalibOptions& opt) {
  obs.validate();
  const PositionPlane plane = fit_position_plane(obs);
  std::array<double, 5> p = {init.tilt_alpha, init.center.x(),
                             init.center.y(), init.center.z(), init.radius};
  std::array<double, 5> m{}, v{};
  std::array<double, 5> grad{};

  AdamOptions adam;
  adam.learning_rate = opt.learning_rate;

  double best = objective(obs, plane, p.data());
  const double initial = best;
  std::array<double, 5> best_p = p;
  int since_improvement = 0;

  for (int it = 1; it <= opt.iterations; ++it) {
    // Central finite differences; the objective is cheap and smooth.
    for (int k = 0; k < 5; ++k) {
      const double h = 1e-7 * std::max(1.0, std::abs(p[k]));
      const double saved = p[k];
      p[k] = saved + h;
      const double hi = objective(obs, plane, p.data());
      p[k] = saved - h;
      const double lo = objective(obs, plane, p.data());
      p[k] = saved;
      grad[k] = (hi - lo) / (2.0 * h);
    }
    adam_step(p.data(), grad.data(), m.data(), v.data(), 5, it, adam);

    const double loss = objective(obs, plane, p.data());
    if (!std::isfinite(loss) || loss > 10.0 * (initial + 1.0))
      throw NumericalError("calibrate: diverged at step " +
                           std::to_string(it) + ", loss " +
                           std::to_string(loss));
    if (loss < best * (1.0 - 1e-12)) {
      best = loss;
      best_p = p;
      since_improvement = 0;
    } else if (++since_improvement >= opt.plateau_patience) {
      adam.learning_rate *= opt.plateau_factor;
      since_improvement = 0;
      if (adam.learning_rate < opt.min_learning_rate) break;
    }
  }

  CalibSolution sol;
  sol.tilt_alpha = best_p[0];
  sol.center = Vec3(best_p[1], best_p[2], best_p[3]);
  sol.radius = best_p[4];
  sol.residual = rms_miss_distance(obs, sol);
  return sol;
}

CircleTrajectory apply_correction(const CircleTrajectory& traj,
                                  const CalibSolution& sol) {
  CircleTrajectory out = traj;
  out.center = sol.center;
  out.radius = sol.radius;
  return out;
}

std::vector<Pose> correct_poses(const std::vector<Pose>& poses,
                                const CalibSolution& sol) {
  // Estimated rotations are R_true * rot_x(alpha); right-multiply by the
  // inverse tilt.
  Mat3 undo = Mat3::Identity();
  const double ca = std::cos(-sol.tilt_alpha);
  const double sa = std::sin(-sol.tilt_alpha);
  undo(1, 1) = ca;
  undo(1, 2) = -sa;
  undo(2, 1) = sa;
  undo(2, 2) = ca;
  std::vector<Pose> out = poses;
  for (Pose& p : out) p.rotation = p.rotation * undo;
  return out;
}

} // namespace evrf
