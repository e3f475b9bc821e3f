#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "evrf/events.hpp"
#include "evrf/field.hpp"
#include "evrf/geometry.hpp"
#include "evrf/renderer.hpp"
#include "evrf/types.hpp"

namespace evrf {

struct TrainConfig {
  int n_windows = 1000;
  double l_max = 0.1;
  double fixed_window = 0; // > 0 pins every window length (ablation)
  double beta = 0.1;       // negative-sampling ratio
  double gamma = 2.2;
  int iterations = 30000;
  double learning_rate = 5e-3;
  double lr_final = 0; // > 0 enables geometric decay towards this value
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_rays = 1024; // cap on selected rays per window
  double log_floor = 1e-4;
  std::uint64_t rng_seed = 1;
  int windows_per_step = 1;
  int threads = 1;
  SamplingConfig sampling;
  Background background;
  bool use_monochrome_mask = false; // grayscale supervision mode

  void validate() const;
};

/// Adam first/second moments matching the grid parameter layout.
struct AdamState {
  std::vector<float> m_density, v_density;
  std::vector<float> m_rgb, v_rgb;
  long step = 0;

  void init(const RadianceGrid& grid);
};

struct AdamOptions {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Standard bias-corrected Adam update over a flat parameter array.
/// Throws NumericalError on non-finite gradients.
template <typename ParamT, typename MomentT>
void adam_step(ParamT* params, const double* grads, MomentT* m, MomentT* v,
               std::size_t n, long step, const AdamOptions& opt);

/// One Adam update of every grid parameter.
void adam_step_grid(RadianceGrid& grid, const GradBuffer& grad,
                    AdamState& state, const AdamOptions& opt);

/// ln(max(v, floor)) / g — the log map applied to rendered intensities.
double log_map(double v, double g, double floor);

/// Log-intensity renders of a pixel set at one pose: every listed pixel is
/// rendered through its sub-pixel jitter and mapped by log_map per channel.
std::vector<Vec3> log_render(const RadianceGrid& grid,
                             const CameraIntrinsics& cam, const Pose& pose,
                             const std::vector<std::int32_t>& pixels,
                             const std::vector<std::pair<double, double>>&
                                 jitters,
                             const SamplingConfig& sampling,
                             const Background& bg, double g, double floor,
                             std::uint64_t seed);

/// Squared residual of one pixel of the event-integral identity:
/// (Lhat(t) - Lhat(t0) - E)^2.
inline double recon_residual_sq(double lhat_t, double lhat_t0, double e) {
  const double r = lhat_t - lhat_t0 - e;
  return r * r;
}

struct WindowLossResult {
  double loss = 0;
  int n_rays = 0;      // selected pixels entering the mean
  bool skipped = false; // no positive pixels in the window
  int nan_pixel = -1;  // linear index of the first non-finite residual
};

/// Reusable per-thread gradient buffers for the parallel ray loop.
struct TrainWorkspace {
  std::vector<GradBuffer> thread_grads;

  void init(const RadianceGrid& grid, int threads);
};

/// Event-window reconstruction loss and its parameter gradients. Renders
/// each selected pixel at pose(t0) and pose(t) with a shared sub-pixel
/// jitter, compares the Bayer-masked log difference against the window's
/// polarity sums and runs the two adjoint passes. `grad` receives the
/// gradient of the mean squared residual; it is not cleared first.
/// `workspace` may be null (buffers are then allocated per call).
WindowLossResult window_loss(const RadianceGrid& grid,
                             const EventStream& stream, double t0, double t,
                             const CircleTrajectory& traj,
                             const CameraIntrinsics& cam,
                             const TrainConfig& cfg, std::uint64_t iter_seed,
                             GradBuffer& grad,
                             TrainWorkspace* workspace = nullptr);

struct TrainReport {
  std::vector<double> losses; // one entry per iteration
};

using CheckpointCallback =
    std::function<void(int iteration, const RadianceGrid& grid)>;

/// Event-supervised optimization: per step draw the next window(s) of a
/// seeded per-epoch permutation, evaluate window_loss, apply Adam.
/// Deterministic given cfg.rng_seed and threads = 1. Throws NumericalError
/// with the iteration/window/pixel on a non-finite loss.
TrainReport train(RadianceGrid& grid, const EventStream& stream,
                  const CircleTrajectory& traj, const CameraIntrinsics& cam,
                  const TrainConfig& cfg,
                  const CheckpointCallback& on_checkpoint = {},
                  int checkpoint_interval = 0);

} // namespace evrf
