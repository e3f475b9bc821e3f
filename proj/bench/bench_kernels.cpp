// Timing harness comparing the serial reference kernels against their
// OpenMP counterparts: full-view rendering, event simulation and the
// window-loss gradient.

#include <chrono>
#include <cstdio>
#include <thread>

#include "evrf/geometry.hpp"
#include "evrf/renderer.hpp"
#include "evrf/rng.hpp"
#include "evrf/scenes.hpp"
#include "evrf/simulator.hpp"
#include "evrf/trainer.hpp"

using namespace evrf;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

template <typename F>
double time_call(F&& fn, int repeats = 3) {
  double best = 1e30;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, seconds_since(start));
  }
  return best;
}

RadianceGrid demo_grid() {
  RadianceGrid grid = RadianceGrid::create(64, 64, 64, Vec3(-0.5, -0.5, -0.5),
                                           Vec3(0.5, 0.5, 0.5));
  Rng rng(21);
  for (float& v : grid.raw_density)
    v = static_cast<float>(rng.uniform(-3.0, 1.0));
  for (float& v : grid.raw_rgb)
    v = static_cast<float>(rng.uniform(-1.5, 1.5));
  grid.clip = default_clip();
  return grid;
}

CircleTrajectory orbit() {
  CircleTrajectory traj;
  traj.radius = 4.0;
  traj.altitude_angle = 30.0 * kPi / 180.0;
  traj.angular_velocity = 2.0 * kPi;
  traj.t_end = 1.0;
  return traj;
}

} // namespace

int main() {
  const int threads =
      static_cast<int>(std::thread::hardware_concurrency());
  std::printf("benchmarking with %d threads against the serial reference\n\n",
              threads);

  const RadianceGrid grid = demo_grid();
  const CircleTrajectory traj = orbit();
  const CameraIntrinsics cam{640, 640, 48, 48, 96, 96};
  const Pose pose = pose_at_time(traj, 0.25);
  const SamplingConfig sampling{64, true, 0};

  {
    const double serial = time_call([&] {
      render_view_serial(grid, cam, pose, sampling, Background{}, 1);
    });
    const double parallel = time_call([&] {
      render_view(grid, cam, pose, sampling, Background{}, threads, 1);
    });
    std::printf("render_view 96x96x64spp   serial %7.3f s   omp %7.3f s   speedup %.2fx\n",
                serial, parallel, serial / parallel);
  }

  const FrameSequence frames =
      make_dataset(tricolour_sphere_scene(), traj, cam, 120);
  {
    SimulatorConfig cfg;
    cfg.delta = 0.1;
    const double serial =
        time_call([&] { simulate(frames, cfg, 1); }, 2);
    const double parallel =
        time_call([&] { simulate(frames, cfg, threads); }, 2);
    std::printf("simulate 120 views        serial %7.3f s   omp %7.3f s   speedup %.2fx\n",
                serial, parallel, serial / parallel);
  }

  {
    SimulatorConfig sim_cfg;
    sim_cfg.delta = 0.1;
    const EventStream stream = simulate(frames, sim_cfg, threads);
    TrainConfig cfg;
    cfg.l_max = 0.05;
    cfg.batch_rays = 1024;
    cfg.sampling.n_samples = 64;
    cfg.background.colour = Vec3(0.8, 0.8, 0.8);
    GradBuffer grad;
    grad.resize_for(grid);
    TrainWorkspace workspace;
    workspace.init(grid, threads);
    const double serial = time_call([&] {
      cfg.threads = 1;
      grad.clear();
      window_loss(grid, stream, 0.45, 0.5, traj, cam, cfg, 7, grad,
                  &workspace);
    });
    const double parallel = time_call([&] {
      cfg.threads = threads;
      grad.clear();
      window_loss(grid, stream, 0.45, 0.5, traj, cam, cfg, 7, grad,
                  &workspace);
    });
    std::printf("window_loss + adjoint     serial %7.3f s   omp %7.3f s   speedup %.2fx\n",
                serial, parallel, serial / parallel);
  }
  return 0;
}
