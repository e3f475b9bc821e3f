#pragma once

#include "evrf/types.hpp"

namespace evrf {

/// Pinhole intrinsics, no distortion. Image y grows downward.
struct CameraIntrinsics {
  double fx = 0, fy = 0; // focal lengths [px]
  double cx = 0, cy = 0; // principal point [px]
  int width = 0, height = 0;

  void validate() const;
};

/// Rigid camera pose. `rotation` maps camera coordinates to world
/// coordinates; `translation` is the camera position in world units.
/// Camera looks along +z in its own frame.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  bool orthonormal(double tol = 1e-9) const;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ(); // unit norm
  double t_near = 0;
  double t_far = 0;

  bool empty() const { return !(t_near < t_far); }
  Vec3 point_at(double t) const { return origin + t * direction; }
};

/// Constant-speed circular orbit looking at its own centre.
struct CircleTrajectory {
  Vec3 center = Vec3::Zero();
  double radius = 4.0;
  double altitude_angle = 0;    // elevation above the orbit plane [rad]
  double angular_velocity = 0;  // [rad/s]
  double t_start = 0;
  double t_end = 0;

  void validate() const;
  double duration() const { return t_end - t_start; }
};

/// Pose at `position` with the optical axis through `target`.
/// `up_hint` resolves the roll; must not be parallel to the view direction.
Pose look_at(const Vec3& position, const Vec3& target,
             const Vec3& up_hint = Vec3::UnitZ());

/// Orbit pose at time t. Throws DomainError outside [t_start, t_end].
Pose pose_at_time(const CircleTrajectory& traj, double t);

/// Ray through sensor point (x + jx, y + jy). The [t_near, t_far] interval
/// is the intersection with the scene bounding sphere (unit radius, world
/// origin); rays that miss it carry an empty interval.
Ray pixel_ray(const CameraIntrinsics& cam, const Pose& pose, int x, int y,
              double jx = 0.5, double jy = 0.5);

} // namespace evrf
