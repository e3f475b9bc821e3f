#include "evrf/geometry.hpp"

#include <cmath>
#include <string>

#include "evrf/errors.hpp"

namespace evrf {

void CameraIntrinsics::validate() const {
  if (fx <= 0 || fy <= 0)
    throw DomainError("camera: focal lengths must be positive");
  if (width < 1 || height < 1)
    throw DomainError("camera: resolution must be at least 1x1");
  if (cx < 0 || cx >= width || cy < 0 || cy >= height)
    throw DomainError("camera: principal point outside the sensor");
}

bool Pose::orthonormal(double tol) const {
  const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
  return err.cwiseAbs().maxCoeff() < tol && rotation.determinant() > 0;
}

void CircleTrajectory::validate() const {
  if (radius <= 0) throw DomainError("trajectory: radius must be positive");
  if (!(t_start < t_end))
    throw DomainError("trajectory: t_start must precede t_end");
}

Pose look_at(const Vec3& position, const Vec3& target, const Vec3& up_hint) {
  Vec3 forward = target - position;
  const double len = forward.norm();
  if (len <= 0) throw DomainError("look_at: position coincides with target");
  forward /= len;
  Vec3 right = forward.cross(up_hint);
  if (right.norm() < 1e-12) {
    // View direction parallel to the up hint; pick any horizontal axis.
    right = forward.cross(Vec3::UnitX());
    if (right.norm() < 1e-12) right = forward.cross(Vec3::UnitY());
  }
  right.normalize();
  const Vec3 down = forward.cross(right); // image y grows downward
  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = position;
  return pose;
}

Pose pose_at_time(const CircleTrajectory& traj, double t) {
  traj.validate();
  if (t < traj.t_start || t > traj.t_end)
    throw DomainError("pose_at_time: t=" + std::to_string(t) +
                      " outside trajectory span");
  const double theta = traj.angular_velocity * (t - traj.t_start);
  const double ca = std::cos(traj.altitude_angle);
  const double sa = std::sin(traj.altitude_angle);
  const Vec3 position =
      traj.center + traj.radius * Vec3(ca * std::cos(theta),
                                       ca * std::sin(theta), sa);
  return look_at(position, traj.center);
}

Ray pixel_ray(const CameraIntrinsics& cam, const Pose& pose, int x, int y,
              double jx, double jy) {
  cam.validate();
  if (x < 0 || x >= cam.width || y < 0 || y >= cam.height)
    throw DomainError("pixel_ray: pixel (" + std::to_string(x) + "," +
                      std::to_string(y) + ") out of bounds");
  const Vec3 dir_cam((x + jx - cam.cx) / cam.fx, (y + jy - cam.cy) / cam.fy,
                     1.0);
  Ray ray;
  ray.origin = pose.translation;
  ray.direction = (pose.rotation * dir_cam).normalized();

  // Interval against the scene bounding sphere.
  const double b = ray.origin.dot(ray.direction);
  const double c =
      ray.origin.squaredNorm() - kSceneSphereRadius * kSceneSphereRadius;
  const double disc = b * b - c;
  if (disc <= 0) {
    ray.t_near = ray.t_far = 0; // miss
  } else {
    const double root = std::sqrt(disc);
    ray.t_near = std::max(-b - root, 0.0);
    ray.t_far = -b + root;
    if (ray.t_far <= ray.t_near) ray.t_near = ray.t_far = 0;
  }
  return ray;
}

} // namespace evrf
