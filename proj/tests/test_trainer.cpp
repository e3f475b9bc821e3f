#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evrf/errors.hpp"
#include "evrf/rng.hpp"
#include "evrf/scenes.hpp"
#include "evrf/simulator.hpp"
#include "evrf/trainer.hpp"
#include "test_util.hpp"

using namespace evrf;
using testutil::random_grid;

namespace {

CircleTrajectory unit_orbit(double angular_velocity = 2.0 * kPi) {
  CircleTrajectory traj;
  traj.center = Vec3::Zero();
  traj.radius = 4.0;
  traj.altitude_angle = 30.0 * kPi / 180.0;
  traj.angular_velocity = angular_velocity;
  traj.t_start = 0.0;
  traj.t_end = 1.0;
  return traj;
}

CameraIntrinsics small_cam(int size = 16) {
  return CameraIntrinsics{3.0 * size, 3.0 * size, size / 2.0, size / 2.0,
                          size, size};
}

EventStream stream_with_events(int w, int h, double delta,
                               std::vector<EventTuple> events) {
  EventStream s;
  s.width = w;
  s.height = h;
  s.delta = delta;
  s.duration = 1.0;
  s.events = std::move(events);
  std::sort(s.events.begin(), s.events.end(),
            [](const EventTuple& a, const EventTuple& b) { return a.t < b.t; });
  s.validate();
  return s;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.n_windows = 16;
  cfg.l_max = 0.1;
  cfg.beta = 0.1;
  cfg.iterations = 4;
  cfg.batch_rays = 256;
  cfg.sampling.n_samples = 16;
  cfg.threads = 1;
  cfg.background.colour = Vec3(0.5, 0.5, 0.5);
  return cfg;
}

} // namespace

TEST_CASE("adam leaves parameters alone under zero gradient") {
  double p[2] = {1.5, -2.0};
  double g[2] = {0.0, 0.0};
  double m[2] = {0, 0}, v[2] = {0, 0};
  adam_step(p, g, m, v, 2, 1, AdamOptions{});
  CHECK(p[0] == 1.5);
  CHECK(p[1] == -2.0);
  CHECK(m[0] == 0.0);
  CHECK(v[0] == 0.0);
}

TEST_CASE("adam first step has learning-rate magnitude") {
  double p = 0.0, g = 1.0, m = 0, v = 0;
  AdamOptions opt;
  opt.learning_rate = 0.01;
  adam_step(&p, &g, &m, &v, 1, 1, opt);
  CHECK(p == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("adam drives a 1-D quadratic to zero") {
  // f(x) = x^2, gradient 2x.
  double x = 3.0, m = 0, v = 0;
  AdamOptions opt;
  opt.learning_rate = 0.1;
  for (long step = 1; step <= 2000; ++step) {
    const double g = 2.0 * x;
    adam_step(&x, &g, &m, &v, 1, step, opt);
  }
  CHECK(std::abs(x) < 1e-3);
}

TEST_CASE("adam rejects non-finite gradients") {
  double p = 0.0, g = std::nan(""), m = 0, v = 0;
  CHECK_THROWS_AS(adam_step(&p, &g, &m, &v, 1, 1, AdamOptions{}),
                  NumericalError);
}

TEST_CASE("log_map basics") {
  CHECK(log_map(1.0, 2.2, 1e-4) == 0.0);
  CHECK(log_map(std::exp(2.2), 2.2, 1e-4) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(log_map(0.5, 2.2, 1e-4) ==
        doctest::Approx(std::log(0.5) / 2.2).epsilon(1e-12));
  CHECK(log_map(0.0, 2.2, 1e-4) ==
        doctest::Approx(std::log(1e-4) / 2.2).epsilon(1e-12));
}

TEST_CASE("log_render maps an empty grid to the log of the background") {
  RadianceGrid grid = random_grid(4, 2);
  std::fill(grid.raw_density.begin(), grid.raw_density.end(), -1e9f);
  Background bg;
  bg.colour = Vec3(0.5, 0.5, 0.5);
  const CameraIntrinsics cam = small_cam();
  const Pose pose = pose_at_time(unit_orbit(), 0.25);
  const std::vector<std::int32_t> pixels = {0, 5 * 16 + 3, 12 * 16 + 9};
  const std::vector<std::pair<double, double>> jitters(pixels.size(),
                                                       {0.5, 0.5});
  const auto logs = log_render(grid, cam, pose, pixels, jitters,
                               SamplingConfig{8, false, 0}, bg, 2.2, 1e-4,
                               11);
  REQUIRE(logs.size() == 3);
  for (const Vec3& l : logs)
    for (int c = 0; c < 3; ++c)
      CHECK(l[c] == doctest::Approx(std::log(0.5) / 2.2).epsilon(1e-12));
}

TEST_CASE("residual arithmetic of the event identity") {
  // Lhat(t) - Lhat(t0) = 0.3 against E = 0.25 -> (0.05)^2.
  CHECK(recon_residual_sq(0.3, 0.0, 0.25) ==
        doctest::Approx(0.0025).epsilon(1e-12));
  CHECK(recon_residual_sq(0.4, 0.1, 0.3) == doctest::Approx(0.0));
}

TEST_CASE("window with no events is skipped with zero loss") {
  const RadianceGrid grid = random_grid(4, 1);
  const EventStream s = stream_with_events(16, 16, 0.1, {});
  GradBuffer grad;
  grad.resize_for(grid);
  const WindowLossResult wl = window_loss(
      grid, s, 0.1, 0.2, unit_orbit(), small_cam(), quick_config(), 7, grad);
  CHECK(wl.skipped);
  CHECK(wl.loss == 0.0);
  CHECK(grad.touched.empty());
}

TEST_CASE("identical poses make the rendered difference vanish exactly") {
  // Zero angular velocity: pose(t0) == pose(t) bitwise, so the loss is the
  // mean squared polarity sum. This also proves both renders share one
  // sub-pixel jitter and one depth-sample sequence.
  const RadianceGrid grid = random_grid(6, 3);
  const EventStream s = stream_with_events(
      16, 16, 0.25,
      {{0.15, 3, 4, 1}, {0.17, 3, 4, 1}, {0.16, 9, 9, -1}, {0.18, 12, 2, 1}});
  TrainConfig cfg = quick_config();
  cfg.beta = 0.5;
  GradBuffer grad;
  grad.resize_for(grid);
  const WindowLossResult wl = window_loss(grid, s, 0.1, 0.2, unit_orbit(0.0),
                                          small_cam(), cfg, 11, grad);
  REQUIRE(!wl.skipped);
  // positives: (3,4) sum +2 -> 0.5^2; (9,9) sum -1 -> 0.25^2; (12,2) 0.25^2;
  // negatives contribute exactly zero.
  const double expected =
      (0.5 * 0.5 + 0.25 * 0.25 + 0.25 * 0.25) / wl.n_rays;
  CHECK(wl.loss == doctest::Approx(expected).epsilon(1e-13));
  CHECK(wl.n_rays == 3 + 2); // ceil(0.5 * 3) = 2 negatives
}

TEST_CASE("grayscale supervision equals the Bayer path on gray scenes") {
  // A grayscale field and gray background: every channel carries the same
  // residual, so one scalar supervising three channels changes nothing.
  RadianceGrid grid = random_grid(5, 7);
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    grid.raw_rgb[3 * i + 1] = grid.raw_rgb[3 * i];
    grid.raw_rgb[3 * i + 2] = grid.raw_rgb[3 * i];
  }
  const EventStream s = stream_with_events(
      16, 16, 0.2, {{0.15, 5, 6, 1}, {0.13, 10, 3, -1}, {0.19, 7, 11, 1}});
  TrainConfig cfg = quick_config();
  GradBuffer grad_a, grad_b;
  grad_a.resize_for(grid);
  grad_b.resize_for(grid);
  const WindowLossResult rggb = window_loss(
      grid, s, 0.1, 0.2, unit_orbit(), small_cam(), cfg, 13, grad_a);
  cfg.use_monochrome_mask = true;
  const WindowLossResult mono = window_loss(
      grid, s, 0.1, 0.2, unit_orbit(), small_cam(), cfg, 13, grad_b);
  REQUIRE(!rggb.skipped);
  CHECK(mono.loss == doctest::Approx(rggb.loss).epsilon(1e-12));
}

TEST_CASE("window_loss gradient matches finite differences") {
  RadianceGrid grid = random_grid(4, 17, 1.0);
  const EventStream s = stream_with_events(
      12, 12, 0.2,
      {{0.12, 5, 5, 1}, {0.14, 6, 6, -1}, {0.16, 5, 7, 1}, {0.13, 7, 5, 1}});
  TrainConfig cfg = quick_config();
  cfg.sampling.n_samples = 12;
  CameraIntrinsics cam = small_cam(12);
  const CircleTrajectory traj = unit_orbit();

  GradBuffer grad;
  grad.resize_for(grid);
  const WindowLossResult wl =
      window_loss(grid, s, 0.08, 0.2, traj, cam, cfg, 19, grad);
  REQUIRE(!wl.skipped);

  auto loss_of = [&]() {
    GradBuffer scratch;
    scratch.resize_for(grid);
    return window_loss(grid, s, 0.08, 0.2, traj, cam, cfg, 19, scratch).loss;
  };
  const double h = 1e-3;
  Rng rng(23);
  int checked = 0;
  for (int attempts = 0; attempts < 200 && checked < 20; ++attempts) {
    if (grad.touched.empty()) break;
    const std::int32_t cell =
        grad.touched[rng.below(grad.touched.size())];
    const auto idx = static_cast<std::size_t>(cell);
    const bool density = rng.next() & 1;
    float* param = density ? &grid.raw_density[idx]
                           : &grid.raw_rgb[3 * idx + rng.below(3)];
    const double analytic =
        density ? grad.density[idx]
                : grad.rgb[3 * idx + (param - &grid.raw_rgb[3 * idx])];
    if (std::abs(analytic) < 1e-6) continue;
    const float saved = *param;
    const float up = static_cast<float>(saved + h);
    const float down = static_cast<float>(saved - h);
    *param = up;
    const double hi = loss_of();
    *param = down;
    const double lo = loss_of();
    *param = saved;
    const double fd = (hi - lo) / (static_cast<double>(up) - down);
    const double rel =
        std::abs(analytic - fd) / std::max(std::abs(analytic), std::abs(fd));
    CHECK(rel < 1e-3);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("window_loss gradients are independent of the thread count") {
  const RadianceGrid grid = random_grid(6, 29);
  std::vector<EventTuple> events;
  Rng rng(31);
  for (int k = 0; k < 120; ++k)
    events.push_back({rng.uniform(0.1, 0.2),
                      static_cast<std::uint16_t>(rng.below(16)),
                      static_cast<std::uint16_t>(rng.below(16)),
                      (rng.next() & 1) ? std::int8_t{1} : std::int8_t{-1}});
  const EventStream s = stream_with_events(16, 16, 0.1, std::move(events));
  TrainConfig cfg = quick_config();

  GradBuffer serial, parallel;
  serial.resize_for(grid);
  parallel.resize_for(grid);
  cfg.threads = 1;
  const WindowLossResult a = window_loss(grid, s, 0.05, 0.2, unit_orbit(),
                                         small_cam(), cfg, 37, serial);
  cfg.threads = 4;
  const WindowLossResult b = window_loss(grid, s, 0.05, 0.2, unit_orbit(),
                                         small_cam(), cfg, 37, parallel);
  REQUIRE(!a.skipped);
  CHECK(a.n_rays == b.n_rays);
  CHECK(std::abs(a.loss - b.loss) < 1e-12);
  for (std::size_t i = 0; i < serial.density.size(); ++i)
    CHECK(std::abs(serial.density[i] - parallel.density[i]) < 1e-12);
  for (std::size_t i = 0; i < serial.rgb.size(); ++i)
    CHECK(std::abs(serial.rgb[i] - parallel.rgb[i]) < 1e-12);
}

TEST_CASE("zero iterations leave the grid untouched") {
  RadianceGrid grid = random_grid(4, 41);
  const RadianceGrid before = grid;
  const EventStream s =
      stream_with_events(16, 16, 0.1, {{0.5, 8, 8, 1}});
  TrainConfig cfg = quick_config();
  cfg.iterations = 0;
  train(grid, s, unit_orbit(), small_cam(), cfg);
  CHECK(grid.raw_density == before.raw_density);
  CHECK(grid.raw_rgb == before.raw_rgb);
}

TEST_CASE("training is bit-reproducible in single-thread mode") {
  const ProceduralScene scene = tricolour_sphere_scene();
  const CircleTrajectory traj = unit_orbit();
  const CameraIntrinsics cam{40, 40, 10, 10, 20, 20};
  const FrameSequence frames = make_dataset(scene, traj, cam, 40);
  SimulatorConfig sim;
  sim.delta = 0.2;
  const EventStream stream = simulate(frames, sim);
  REQUIRE(stream.loop_closed);

  TrainConfig cfg = quick_config();
  cfg.iterations = 6;
  cfg.n_windows = 10;
  cfg.l_max = 0.05;
  cfg.background.colour = scene.background;

  RadianceGrid a = RadianceGrid::create(8, 8, 8, Vec3(-0.5, -0.5, -0.5),
                                        Vec3(0.5, 0.5, 0.5));
  RadianceGrid b = a;
  const TrainReport ra = train(a, stream, traj, cam, cfg);
  const TrainReport rb = train(b, stream, traj, cam, cfg);
  CHECK(a.raw_density == b.raw_density);
  CHECK(a.raw_rgb == b.raw_rgb);
  CHECK(ra.losses == rb.losses);
  for (double l : ra.losses) CHECK(l >= 0.0);
}

TEST_CASE("train aborts with a diagnostic on non-finite parameters") {
  RadianceGrid grid = random_grid(4, 47);
  std::fill(grid.raw_rgb.begin(), grid.raw_rgb.end(),
            std::numeric_limits<float>::quiet_NaN());
  std::vector<EventTuple> events;
  Rng rng(53);
  for (int k = 0; k < 64; ++k)
    events.push_back({rng.uniform(0.0, 1.0),
                      static_cast<std::uint16_t>(rng.below(16)),
                      static_cast<std::uint16_t>(rng.below(16)), 1});
  const EventStream s = stream_with_events(16, 16, 0.1, std::move(events));
  TrainConfig cfg = quick_config();
  cfg.iterations = 3;
  CHECK_THROWS_AS(train(grid, s, unit_orbit(), small_cam(), cfg),
                  NumericalError);
}

TEST_CASE("train validates the stream/trajectory span") {
  RadianceGrid grid = random_grid(4, 59);
  const EventStream s = stream_with_events(16, 16, 0.1, {{0.5, 8, 8, 1}});
  CircleTrajectory traj = unit_orbit();
  traj.t_end = 2.0;
  CHECK_THROWS_AS(train(grid, s, traj, small_cam(), quick_config()),
                  DomainError);
}
