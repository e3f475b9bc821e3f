#pragma once

#include <vector>

#include "evrf/geometry.hpp"
#include "evrf/types.hpp"

namespace evrf {

/// Per-view pose estimates from an external solver (e.g. a chequerboard
/// pipeline). Positions lie on the capture circle; orientations may carry a
/// common residual tilt.
struct CalibObservation {
  std::vector<Pose> poses;

  void validate() const;
};

/// Residual tilt about the camera x axis, circle centre and radius that
/// make every tilt-corrected principal ray meet at the centre, at distance
/// radius.
struct CalibSolution {
  double tilt_alpha = 0; // radians
  Vec3 center{0, 0, 0};
  double radius = 1;
  double residual = 0; // RMS principal-ray miss distance [world units]
};

struct CalibOptions {
  int iterations = 40000;
  double learning_rate = 3e-2;
  int plateau_patience = 400; // steps without improvement before decay
  double plateau_factor = 0.5;
  double min_learning_rate = 1e-12;
};

/// Centroid / mean-distance / zero-tilt starting point.
CalibSolution default_init(const CalibObservation& obs);

/// Tilt-corrected principal direction of one pose.
Vec3 corrected_principal_direction(const Pose& pose, double alpha);

/// RMS distance from the centre to the corrected principal rays.
double rms_miss_distance(const CalibObservation& obs,
                         const CalibSolution& sol);

/// Adam with learning-rate reduction on plateaus over (alpha, center,
/// radius), minimizing ray-to-centre miss distances plus circle-distance
/// residuals. Throws NumericalError on divergence.
CalibSolution calibrate(const CalibObservation& obs,
                        const CalibSolution& init,
                        const CalibOptions& opt = {});

/// Recalibrated orbit: centre and radius replaced by the solution.
CircleTrajectory apply_correction(const CircleTrajectory& traj,
                                  const CalibSolution& sol);

/// Undo the tilt on explicit pose estimates.
std::vector<Pose> correct_poses(const std::vector<Pose>& poses,
                                const CalibSolution& sol);

} // namespace evrf
