#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evrf/calibration.hpp"
#include "evrf/errors.hpp"
#include "evrf/geometry.hpp"
#include "evrf/rng.hpp"

using namespace evrf;

namespace {

Mat3 rot_x(double angle) {
  Mat3 r = Mat3::Identity();
  r(1, 1) = std::cos(angle);
  r(1, 2) = -std::sin(angle);
  r(2, 1) = std::sin(angle);
  r(2, 2) = std::cos(angle);
  return r;
}

// Turntable-style poses: cameras on a circle looking at the circle's own
// centre (in the position plane), then tilted in the camera frame.
CalibObservation tilted_circle(double tilt, int n_views = 36,
                               const Vec3& center = Vec3(0.2, -0.1, 1.3),
                               double radius = 4.0) {
  CalibObservation obs;
  for (int k = 0; k < n_views; ++k) {
    const double theta = 2.0 * kPi * k / n_views;
    const Vec3 position =
        center + radius * Vec3(std::cos(theta), std::sin(theta), 0.0);
    Pose pose = look_at(position, center);
    pose.rotation = pose.rotation * rot_x(tilt);
    obs.poses.push_back(pose);
  }
  return obs;
}

constexpr double kDeg = kPi / 180.0;

} // namespace

TEST_CASE("zero tilt is recovered as zero with negligible residual") {
  const CalibObservation obs = tilted_circle(0.0);
  const CalibSolution sol = calibrate(obs, default_init(obs));
  CHECK(std::abs(sol.tilt_alpha) < 1e-6);
  CHECK(sol.residual < 1e-9 * 4.0);
  CHECK(sol.radius == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("a 2.85 degree tilt is recovered within 0.05 degrees") {
  const double tilt = 2.85 * kDeg;
  const CalibObservation obs = tilted_circle(tilt);
  const CalibSolution sol = calibrate(obs, default_init(obs));
  CHECK(std::abs(sol.tilt_alpha - tilt) < 0.05 * kDeg);
  CHECK(sol.residual < 1e-6 * 4.0);
}

TEST_CASE("a 0.2388 degree tilt is recovered within 0.05 degrees") {
  const double tilt = 0.2388 * kDeg;
  const CalibObservation obs = tilted_circle(tilt);
  const CalibSolution sol = calibrate(obs, default_init(obs));
  CHECK(std::abs(sol.tilt_alpha - tilt) < 0.05 * kDeg);
  CHECK(sol.residual < 1e-6 * 4.0);
}

TEST_CASE("solution is covariant under rigid transforms of the input") {
  const double tilt = 1.2 * kDeg;
  const CalibObservation obs = tilted_circle(tilt);
  const CalibSolution sol = calibrate(obs, default_init(obs));

  // Rigidly move every pose.
  const Mat3 world_rot =
      Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const Vec3 world_shift(2.0, -1.0, 0.5);
  CalibObservation moved;
  for (const Pose& p : obs.poses) {
    Pose q;
    q.rotation = world_rot * p.rotation;
    q.translation = world_rot * p.translation + world_shift;
    moved.poses.push_back(q);
  }
  const CalibSolution sol2 = calibrate(moved, default_init(moved));
  CHECK(std::abs(sol2.tilt_alpha - sol.tilt_alpha) < 1e-5);
  CHECK(std::abs(sol2.radius - sol.radius) < 1e-5);
  CHECK(std::abs(sol2.residual - sol.residual) < 1e-7);
  const Vec3 expected_center = world_rot * sol.center + world_shift;
  CHECK((sol2.center - expected_center).norm() < 1e-4);
}

TEST_CASE("apply_correction with zero tilt changes nothing") {
  CircleTrajectory traj;
  traj.center = Vec3(0.1, 0.2, 0.3);
  traj.radius = 3.0;
  traj.angular_velocity = 2 * kPi;
  traj.t_end = 1.0;
  CalibSolution sol;
  sol.tilt_alpha = 0;
  sol.center = traj.center;
  sol.radius = traj.radius;
  const CircleTrajectory out = apply_correction(traj, sol);
  CHECK(out.center == traj.center);
  CHECK(out.radius == traj.radius);
  CHECK(out.angular_velocity == traj.angular_velocity);
}

TEST_CASE("correcting the poses removes the injected tilt") {
  const double tilt = 2.0 * kDeg;
  const CalibObservation obs = tilted_circle(tilt);
  const CalibSolution sol = calibrate(obs, default_init(obs));

  CalibObservation corrected;
  corrected.poses = correct_poses(obs.poses, sol);
  CalibSolution zeroed = sol;
  zeroed.tilt_alpha = 0;
  // Corrected principal rays pass through the recovered centre.
  CHECK(rms_miss_distance(corrected, zeroed) < 1e-6 * sol.radius);
  // And the correction never makes the miss distance worse.
  CalibSolution uncorrected = sol;
  uncorrected.tilt_alpha = 0;
  CHECK(rms_miss_distance(corrected, zeroed) <=
        rms_miss_distance(obs, uncorrected) + 1e-12);
}

TEST_CASE("calibration input validation") {
  CalibObservation two;
  two.poses = tilted_circle(0.0, 4).poses;
  two.poses.resize(2);
  CHECK_THROWS_AS(two.validate(), DomainError);

  CalibObservation collinear;
  for (int k = 0; k < 4; ++k) {
    Pose p;
    p.translation = Vec3(k, 0, 0);
    collinear.poses.push_back(p);
  }
  CHECK_THROWS_AS(collinear.validate(), DomainError);
}
