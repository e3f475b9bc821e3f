#include "evrf/scenes.hpp"

#include <algorithm>
#include <cmath>

#include "evrf/errors.hpp"

namespace evrf {

void ProceduralScene::validate() const {
  for (const ScenePrimitive& prim : primitives) {
    for (int c = 0; c < 3; ++c)
      if (!(prim.albedo[c] > 0 && prim.albedo[c] < 1))
        throw DomainError("scene: albedos must lie in (0, 1)");
    if (prim.kind == ScenePrimitive::Kind::Sphere) {
      if (prim.radius <= 0) throw DomainError("scene: sphere radius <= 0");
      if (prim.center.norm() + prim.radius > kSceneSphereRadius)
        throw DomainError("scene: sphere outside the scene bounding sphere");
    } else {
      for (int a = 0; a < 3; ++a)
        if (!(prim.center[a] < prim.box_max[a]))
          throw DomainError("scene: degenerate box");
      if (std::max(prim.center.norm(), prim.box_max.norm()) >
          kSceneSphereRadius)
        throw DomainError("scene: box outside the scene bounding sphere");
    }
  }
  for (int c = 0; c < 3; ++c)
    if (!(background[c] > 0))
      throw DomainError("scene: background must be positive");
}

ProceduralScene tricolour_sphere_scene() {
  ProceduralScene scene;
  scene.background = Vec3(0.8, 0.8, 0.8);
  const double orbit = 0.12;
  const double radius = 0.09;
  const Vec3 albedos[3] = {Vec3(0.85, 0.2, 0.15), Vec3(0.2, 0.75, 0.2),
                           Vec3(0.2, 0.3, 0.85)};
  for (int k = 0; k < 3; ++k) {
    ScenePrimitive p;
    p.kind = ScenePrimitive::Kind::Sphere;
    const double angle = 2.0 * kPi * k / 3.0;
    p.center = Vec3(orbit * std::cos(angle), orbit * std::sin(angle), 0.0);
    p.radius = radius;
    p.albedo = albedos[k];
    scene.primitives.push_back(p);
  }
  return scene;
}

std::optional<double> intersect_primitive(const ScenePrimitive& prim,
                                          const Vec3& origin,
                                          const Vec3& direction) {
  if (prim.kind == ScenePrimitive::Kind::Sphere) {
    const Vec3 oc = origin - prim.center;
    const double b = oc.dot(direction);
    const double c = oc.squaredNorm() - prim.radius * prim.radius;
    const double disc = b * b - c;
    if (disc < 0) return std::nullopt;
    const double root = std::sqrt(disc);
    const double t0 = -b - root;
    if (t0 > 0) return t0;
    const double t1 = -b + root;
    if (t1 > 0) return t1;
    return std::nullopt;
  }
  // Axis-aligned box via the slab method.
  double t_near = 0, t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (direction[a] == 0) {
      if (origin[a] < prim.center[a] || origin[a] > prim.box_max[a])
        return std::nullopt;
      continue;
    }
    double lo = (prim.center[a] - origin[a]) / direction[a];
    double hi = (prim.box_max[a] - origin[a]) / direction[a];
    if (lo > hi) std::swap(lo, hi);
    t_near = std::max(t_near, lo);
    t_far = std::min(t_far, hi);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_far <= 0) return std::nullopt;
  return t_near > 0 ? t_near : t_far;
}

ViewImages render_ground_truth(const ProceduralScene& scene,
                               const CameraIntrinsics& cam,
                               const Pose& pose) {
  cam.validate();
  scene.validate();
  ViewImages out;
  out.rgb = Image::zeros(cam.width, cam.height, 3);
  out.depth = Image::zeros(cam.width, cam.height, 1);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Ray ray = pixel_ray(cam, pose, x, y, 0.5, 0.5);
      double best = std::numeric_limits<double>::infinity();
      const ScenePrimitive* hit = nullptr;
      for (const ScenePrimitive& prim : scene.primitives) {
        const auto t = intersect_primitive(prim, ray.origin, ray.direction);
        if (t && *t < best) {
          best = *t;
          hit = &prim;
        }
      }
      const Vec3 colour = hit ? hit->albedo : scene.background;
      for (int c = 0; c < 3; ++c) out.rgb.at(x, y, c) = colour[c];
      out.depth.at(x, y, 0) = hit ? best : 0.0;
    }
  }
  return out;
}

FrameSequence make_dataset(const ProceduralScene& scene,
                           const CircleTrajectory& traj,
                           const CameraIntrinsics& cam, int n_views,
                           double gamma) {
  if (n_views < 2) throw DomainError("make_dataset: need n_views >= 2");
  traj.validate();
  FrameSequence seq;
  seq.gamma = gamma;
  seq.frames.reserve(n_views + 1);
  seq.timestamps.reserve(n_views + 1);
  const bool full_sweep =
      std::abs(traj.angular_velocity * traj.duration() - 2.0 * kPi) < 1e-9;
  for (int k = 0; k <= n_views; ++k) {
    const double t =
        traj.t_start + traj.duration() * static_cast<double>(k) / n_views;
    if (k == n_views && full_sweep) {
      seq.frames.push_back(seq.frames.front()); // exact loop closure
    } else {
      seq.frames.push_back(
          render_ground_truth(scene, cam, pose_at_time(traj, t)).rgb);
    }
    seq.timestamps.push_back(t);
  }
  return seq;
}

} // namespace evrf
