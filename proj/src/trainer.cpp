#include "evrf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evrf/errors.hpp"
#include "evrf/rng.hpp"

namespace evrf {

void TrainConfig::validate() const {
  if (n_windows < 1) throw DomainError("train: n_windows >= 1");
  if (!(l_max > 0)) throw DomainError("train: l_max must be > 0");
  if (beta < 0) throw DomainError("train: beta must be >= 0");
  if (gamma <= 0) throw DomainError("train: gamma must be > 0");
  if (iterations < 0) throw DomainError("train: iterations must be >= 0");
  if (learning_rate <= 0) throw DomainError("train: learning_rate > 0");
  if (batch_rays < 1) throw DomainError("train: batch_rays >= 1");
  if (log_floor <= 0) throw DomainError("train: log_floor > 0");
  if (windows_per_step < 1) throw DomainError("train: windows_per_step >= 1");
  sampling.validate();
}

void AdamState::init(const RadianceGrid& grid) {
  m_density.assign(grid.cell_count(), 0.0f);
  v_density.assign(grid.cell_count(), 0.0f);
  m_rgb.assign(grid.cell_count() * 3, 0.0f);
  v_rgb.assign(grid.cell_count() * 3, 0.0f);
  step = 0;
}

template <typename ParamT, typename MomentT>
void adam_step(ParamT* params, const double* grads, MomentT* m, MomentT* v,
               std::size_t n, long step, const AdamOptions& opt) {
  const double corr1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
  const double corr2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    if (!std::isfinite(g))
      throw NumericalError("adam_step: non-finite gradient at index " +
                           std::to_string(i));
    const double m_new = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
    const double v_new = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
    m[i] = static_cast<MomentT>(m_new);
    v[i] = static_cast<MomentT>(v_new);
    const double m_hat = m_new / corr1;
    const double v_hat = v_new / corr2;
    params[i] = static_cast<ParamT>(
        params[i] - opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.eps));
  }
}

template void adam_step<float, float>(float*, const double*, float*, float*,
                                      std::size_t, long, const AdamOptions&);
template void adam_step<double, double>(double*, const double*, double*,
                                        double*, std::size_t, long,
                                        const AdamOptions&);

void adam_step_grid(RadianceGrid& grid, const GradBuffer& grad,
                    AdamState& state, const AdamOptions& opt) {
  ++state.step;
  adam_step(grid.raw_density.data(), grad.density.data(),
            state.m_density.data(), state.v_density.data(),
            grid.cell_count(), state.step, opt);
  adam_step(grid.raw_rgb.data(), grad.rgb.data(), state.m_rgb.data(),
            state.v_rgb.data(), grid.cell_count() * 3, state.step, opt);
}

double log_map(double v, double g, double floor) {
  return std::log(std::max(v, floor)) / g;
}

std::vector<Vec3> log_render(const RadianceGrid& grid,
                             const CameraIntrinsics& cam, const Pose& pose,
                             const std::vector<std::int32_t>& pixels,
                             const std::vector<std::pair<double, double>>&
                                 jitters,
                             const SamplingConfig& sampling,
                             const Background& bg, double g, double floor,
                             std::uint64_t seed) {
  if (g <= 0) throw DomainError("log_render: gamma must be > 0");
  if (pixels.size() != jitters.size())
    throw DomainError("log_render: pixel/jitter count mismatch");
  std::vector<Vec3> out(pixels.size());
  RenderResult result;
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    const int x = pixels[k] % cam.width;
    const int y = pixels[k] / cam.width;
    const Ray ray =
        pixel_ray(cam, pose, x, y, jitters[k].first, jitters[k].second);
    render_ray(grid, ray, sampling, bg,
               derive_seed(seed, SeedStream::DepthSamples,
                           static_cast<std::uint64_t>(pixels[k])),
               result);
    for (int c = 0; c < 3; ++c)
      out[k][c] = log_map(result.rgb[c], g, floor);
  }
  return out;
}

namespace {

// Pose at a possibly wrapped timestamp (loop-closed windows can start
// before t = 0; the trajectory is periodic there).
Pose pose_at_wrapped(const CircleTrajectory& traj, double t) {
  if (t < traj.t_start) t += traj.duration();
  return pose_at_time(traj, t);
}

struct PixelWork {
  std::int32_t pixel = 0;
  double residual = 0;
  bool floored0 = false, floored1 = false;
  double value0 = 0, value1 = 0; // rendered channel intensities
};

} // namespace

void TrainWorkspace::init(const RadianceGrid& grid, int threads) {
  thread_grads.resize(std::max(0, threads));
  for (auto& g : thread_grads) g.resize_for(grid);
}

WindowLossResult window_loss(const RadianceGrid& grid,
                             const EventStream& stream, double t0, double t,
                             const CircleTrajectory& traj,
                             const CameraIntrinsics& cam,
                             const TrainConfig& cfg, std::uint64_t iter_seed,
                             GradBuffer& grad, TrainWorkspace* workspace) {
  WindowLossResult result;
  const BayerMask mask = cfg.use_monochrome_mask
                             ? BayerMask::all_channels(stream.width,
                                                       stream.height)
                             : BayerMask::rggb(stream.width, stream.height);
  const AccumFrame frame = accumulate(stream, t0, t, &mask);
  RaySelection sel = select_rays(
      frame, cfg.beta, derive_seed(iter_seed, SeedStream::NegativeSampling));
  if (sel.empty()) {
    result.skipped = true;
    return result;
  }

  // Cap the batch, keeping the positive:negative ratio.
  const auto cap_pos = static_cast<std::size_t>(
      std::max(1.0, cfg.batch_rays / (1.0 + cfg.beta)));
  Rng sub(derive_seed(iter_seed, SeedStream::BatchSubsample));
  if (sel.positive.size() > cap_pos) {
    for (std::size_t k = 0; k < cap_pos; ++k) {
      const std::size_t j = k + sub.below(sel.positive.size() - k);
      std::swap(sel.positive[k], sel.positive[j]);
    }
    sel.positive.resize(cap_pos);
  }
  const auto cap_neg = static_cast<std::size_t>(
      std::ceil(cfg.beta * static_cast<double>(sel.positive.size()) - 1e-9));
  if (sel.negative.size() > cap_neg) {
    for (std::size_t k = 0; k < cap_neg; ++k) {
      const std::size_t j = k + sub.below(sel.negative.size() - k);
      std::swap(sel.negative[k], sel.negative[j]);
    }
    sel.negative.resize(cap_neg);
  }

  std::vector<std::int32_t> pixels = sel.positive;
  pixels.insert(pixels.end(), sel.negative.begin(), sel.negative.end());
  const int n_rays = static_cast<int>(pixels.size());
  result.n_rays = n_rays;

  const Pose pose0 = pose_at_wrapped(traj, t0);
  const Pose pose1 = pose_at_time(traj, t);
  const double inv_n = 1.0 / n_rays;

  double loss = 0;
  int nan_pixel = -1;

  const int threads = std::max(1, cfg.threads);
  TrainWorkspace local_ws;
  TrainWorkspace* ws = workspace;
  if (threads > 1 &&
      (!ws || static_cast<int>(ws->thread_grads.size()) < threads)) {
    local_ws.init(grid, threads);
    ws = &local_ws;
  }

  auto process_ray = [&](int k, GradBuffer& gbuf, RenderResult& r0,
                         RenderResult& r1, double& loss_out,
                         int& nan_out) {
    const std::int32_t pixel = pixels[k];
    const int x = pixel % stream.width;
    const int y = pixel / stream.width;
    // Shared sub-pixel jitter: both views look through the same sensor
    // point, so the difference carries no sampling parallax.
    Rng jit(derive_seed(iter_seed, SeedStream::PixelJitter,
                        static_cast<std::uint64_t>(pixel)));
    const double jx = jit.uniform();
    const double jy = jit.uniform();
    const std::uint64_t depth_seed = derive_seed(
        iter_seed, SeedStream::DepthSamples, static_cast<std::uint64_t>(pixel));
    const Ray ray0 = pixel_ray(cam, pose0, x, y, jx, jy);
    const Ray ray1 = pixel_ray(cam, pose1, x, y, jx, jy);
    render_ray(grid, ray0, cfg.sampling, cfg.background, depth_seed, r0);
    render_ray(grid, ray1, cfg.sampling, cfg.background, depth_seed, r1);

    const int ch_begin = mask.monochrome ? 0 : mask.channel(x, y);
    const int ch_end = mask.monochrome ? 3 : ch_begin + 1;
    const double channel_norm = mask.monochrome ? 1.0 / 3.0 : 1.0;
    for (int ch = ch_begin; ch < ch_end; ++ch) {
      const double v0 = r0.rgb[ch];
      const double v1 = r1.rgb[ch];
      const double l0 = log_map(v0, cfg.gamma, cfg.log_floor);
      const double l1 = log_map(v1, cfg.gamma, cfg.log_floor);
      const double residual = l1 - l0 - frame.value_at(x, y);
      if (!std::isfinite(residual)) {
        nan_out = pixel;
        return;
      }
      loss_out += residual * residual * inv_n * channel_norm;
      // d loss / d residual, then through the log map (clamped values
      // carry no gradient).
      const double dresidual = 2.0 * residual * inv_n * channel_norm;
      Vec3 d1 = Vec3::Zero(), d0 = Vec3::Zero();
      if (v1 > cfg.log_floor) d1[ch] = dresidual / (cfg.gamma * v1);
      if (v0 > cfg.log_floor) d0[ch] = -dresidual / (cfg.gamma * v0);
      if (d1[ch] != 0) render_ray_adjoint(r1, d1, grid, gbuf);
      if (d0[ch] != 0) render_ray_adjoint(r0, d0, grid, gbuf);
    }
  };

  if (threads <= 1) {
    RenderResult r0, r1;
    for (int k = 0; k < n_rays; ++k)
      process_ray(k, grad, r0, r1, loss, nan_pixel);
  } else {
#ifdef _OPENMP
    std::vector<double> thread_loss(threads, 0.0);
    std::vector<int> thread_nan(threads, -1);
#pragma omp parallel num_threads(threads)
    {
      RenderResult r0, r1;
      const int tid = omp_get_thread_num();
#pragma omp for schedule(static)
      for (int k = 0; k < n_rays; ++k)
        process_ray(k, ws->thread_grads[tid], r0, r1, thread_loss[tid],
                    thread_nan[tid]);
    }
    // Reduce in thread-index order so the result does not depend on
    // scheduling.
    for (int tid = 0; tid < threads; ++tid) {
      loss += thread_loss[tid];
      if (thread_nan[tid] >= 0 && nan_pixel < 0) nan_pixel = thread_nan[tid];
      ws->thread_grads[tid].drain_into(grad);
    }
#else
    RenderResult r0, r1;
    for (int k = 0; k < n_rays; ++k)
      process_ray(k, grad, r0, r1, loss, nan_pixel);
#endif
  }

  result.loss = loss;
  result.nan_pixel = nan_pixel;
  return result;
}

TrainReport train(RadianceGrid& grid, const EventStream& stream,
                  const CircleTrajectory& traj, const CameraIntrinsics& cam,
                  const TrainConfig& cfg, const CheckpointCallback& on_checkpoint,
                  int checkpoint_interval) {
  cfg.validate();
  stream.validate();
  traj.validate();
  cam.validate();
  if (std::abs(traj.t_start) > 1e-12 ||
      std::abs(traj.duration() - stream.duration) > 1e-6)
    throw DomainError("train: stream and trajectory must cover the same "
                      "[0, duration] span");

  TrainReport report;
  report.losses.reserve(cfg.iterations);

  AdamState adam;
  adam.init(grid);
  AdamOptions opt;
  opt.beta1 = cfg.adam_beta1;
  opt.beta2 = cfg.adam_beta2;
  opt.eps = cfg.adam_eps;

  GradBuffer grad;
  grad.resize_for(grid);
  TrainWorkspace workspace;
  if (cfg.threads > 1) workspace.init(grid, cfg.threads);

  WindowSampler sampler;
  sampler.n_windows = cfg.n_windows;
  sampler.l_max = cfg.l_max;
  sampler.fixed_length = cfg.fixed_window;
  sampler.duration = stream.duration;
  sampler.loop_closed = stream.loop_closed;

  std::vector<int> permutation(cfg.n_windows);
  long window_cursor = 0;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    double loss = 0;
    int used_windows = 0;
    grad.clear();
    for (int wstep = 0; wstep < cfg.windows_per_step; ++wstep) {
      const long epoch = window_cursor / cfg.n_windows;
      const long pos = window_cursor % cfg.n_windows;
      if (pos == 0) {
        std::iota(permutation.begin(), permutation.end(), 1);
        Rng rng(derive_seed(cfg.rng_seed, SeedStream::WindowPermutation,
                            static_cast<std::uint64_t>(epoch)));
        for (std::size_t k = 0; k + 1 < permutation.size(); ++k) {
          const std::size_t j = k + rng.below(permutation.size() - k);
          std::swap(permutation[k], permutation[j]);
        }
      }
      ++window_cursor;
      const int i = permutation[pos];
      sampler.rng_seed = derive_seed(cfg.rng_seed, SeedStream::WindowSampler,
                                     static_cast<std::uint64_t>(epoch));
      const auto [t0, t] = sample_window(sampler, i);
      const std::uint64_t iter_seed =
          derive_seed(cfg.rng_seed, SeedStream::PixelJitter,
                      static_cast<std::uint64_t>(window_cursor));
      const WindowLossResult wl = window_loss(grid, stream, t0, t, traj, cam,
                                              cfg, iter_seed, grad,
                                              &workspace);
      if (wl.nan_pixel >= 0 || !std::isfinite(wl.loss))
        throw NumericalError(
            "train: non-finite loss at iteration " + std::to_string(iter) +
            ", window " + std::to_string(i) + ", pixel " +
            std::to_string(wl.nan_pixel));
      if (!wl.skipped) {
        loss += wl.loss;
        ++used_windows;
      }
    }
    if (used_windows > 1) {
      loss /= used_windows;
      grad.scale(1.0 / used_windows);
    }

    opt.learning_rate = cfg.learning_rate;
    if (cfg.lr_final > 0 && cfg.iterations > 1) {
      const double frac = static_cast<double>(iter) / (cfg.iterations - 1);
      opt.learning_rate = cfg.learning_rate *
                          std::pow(cfg.lr_final / cfg.learning_rate, frac);
    }
    adam_step_grid(grid, grad, adam, opt);
    report.losses.push_back(loss);

    if (on_checkpoint && checkpoint_interval > 0 &&
        (iter + 1) % checkpoint_interval == 0)
      on_checkpoint(iter + 1, grid);
  }
  return report;
}

} // namespace evrf
