#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evrf/geometry.hpp"
#include "evrf/renderer.hpp"
#include "evrf/simulator.hpp"
#include "evrf/types.hpp"

namespace evrf {

/// Analytic primitive with a flat albedo (no shading), so surfaces are
/// piecewise constant in log intensity.
struct ScenePrimitive {
  enum class Kind { Sphere, Box };
  Kind kind = Kind::Sphere;
  Vec3 center = Vec3::Zero(); // sphere centre / box minimum corner
  double radius = 0.1;        // sphere only
  Vec3 box_max = Vec3::Zero();
  Vec3 albedo{0.5, 0.5, 0.5};
};

struct ProceduralScene {
  std::vector<ScenePrimitive> primitives;
  Vec3 background{0.8, 0.8, 0.8};

  void validate() const;
};

/// Three coloured spheres inside the default clip cylinder over a light
/// gray background; silhouette events carry the colour balance.
ProceduralScene tricolour_sphere_scene();

/// Nearest-hit distance of a primitive along a ray, if any.
std::optional<double> intersect_primitive(const ScenePrimitive& prim,
                                          const Vec3& origin,
                                          const Vec3& direction);

/// Exact render: albedo of the nearest hit, background elsewhere; depth is
/// the hit distance (0 on miss).
ViewImages render_ground_truth(const ProceduralScene& scene,
                               const CameraIntrinsics& cam, const Pose& pose);

/// n_views + 1 frames at t = k * duration / n_views along the trajectory;
/// the final frame repeats the first, closing the loop.
FrameSequence make_dataset(const ProceduralScene& scene,
                           const CircleTrajectory& traj,
                           const CameraIntrinsics& cam, int n_views,
                           double gamma = 2.2);

} // namespace evrf
