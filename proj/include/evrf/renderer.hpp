#pragma once

#include <cstdint>
#include <vector>

#include "evrf/field.hpp"
#include "evrf/geometry.hpp"
#include "evrf/image.hpp"
#include "evrf/types.hpp"

namespace evrf {

struct SamplingConfig {
  int n_samples = 64;
  bool stratified = true;
  /// Extra samples drawn from the first pass's weight histogram and merged
  /// in for a second forward pass. 0 disables the pass.
  int importance_resample = 0;

  void validate() const;
};

/// Known constant scene background, composited behind the field via the
/// residual transmittance. Components must be positive (log-safe).
struct Background {
  Vec3 colour{0.8, 0.8, 0.8};
};

/// Forward rendering state of one ray. The per-sample arrays are retained
/// for the adjoint pass.
struct RenderResult {
  Vec3 rgb{0, 0, 0};      // linear light
  double depth = 0;       // expected depth, world units
  double opacity = 0;     // 1 - T_final
  double t_final = 1;     // transmittance past the last sample
  Ray ray;
  Vec3 background{0, 0, 0};
  std::vector<double> q;      // sample depths
  std::vector<double> kappa;  // inter-sample distances (last: t_far - q_S)
  std::vector<double> T;      // transmittance reaching each sample
  std::vector<double> w;      // compositing weights
  std::vector<double> sigma;
  std::vector<Vec3> c;

  void reset();
};

/// Render one ray. Sample depths are stratified-jittered from `seed`
/// (midpoints when cfg.stratified is false). An empty ray interval yields
/// pure background with zero opacity.
void render_ray(const RadianceGrid& grid, const Ray& ray,
                const SamplingConfig& cfg, const Background& bg,
                std::uint64_t seed, RenderResult& out);
RenderResult render_ray(const RadianceGrid& grid, const Ray& ray,
                        const SamplingConfig& cfg, const Background& bg,
                        std::uint64_t seed);

/// Exact reverse-mode derivatives of the rendered colour (including the
/// transmittance chain and the background term), pushed into grid parameter
/// gradients. Importance-resampled depths are treated as constants.
void render_ray_adjoint(const RenderResult& result, const Vec3& dloss_drgb,
                        const RadianceGrid& grid, GradBuffer& grad);

struct ViewImages {
  Image rgb;   // 3 channels, linear light
  Image depth; // 1 channel, world units; 0 where opacity < 0.5
};

/// Render a full view at pixel centres. Deterministic for a given seed and
/// independent of the thread count.
ViewImages render_view(const RadianceGrid& grid, const CameraIntrinsics& cam,
                       const Pose& pose, const SamplingConfig& cfg,
                       const Background& bg, int threads = 1,
                       std::uint64_t seed = 0);

/// Single-threaded reference used by tests and the benchmark.
ViewImages render_view_serial(const RadianceGrid& grid,
                              const CameraIntrinsics& cam, const Pose& pose,
                              const SamplingConfig& cfg, const Background& bg,
                              std::uint64_t seed = 0);

} // namespace evrf
