#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace evrf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

// All test scenes fit inside this sphere; per-ray sampling intervals are
// clipped against it.
inline constexpr double kSceneSphereRadius = 1.0;

} // namespace evrf
