#include "evrf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "evrf/calibration.hpp"
#include "evrf/config.hpp"
#include "evrf/errors.hpp"
#include "evrf/manifest.hpp"
#include "evrf/metrics.hpp"
#include "evrf/simulator.hpp"

namespace evrf {

namespace {

namespace fs = std::filesystem;

bool trajectory_is_closed(const CircleTrajectory& traj) {
  return std::abs(traj.angular_velocity * traj.duration() - 2.0 * kPi) < 1e-9;
}

std::vector<double> held_out_times(const CircleTrajectory& traj, int count,
                                   int train_views) {
  // Halfway between training frames, spread around the circle.
  std::vector<double> times;
  const double dt = traj.duration() / train_views;
  for (int k = 0; k < count; ++k) {
    const int idx = static_cast<int>(
        (static_cast<long>(k) * train_views) / count);
    times.push_back(traj.t_start + (idx + 0.5) * dt);
  }
  return times;
}

int cmd_dataset(const RunConfig& cfg) {
  const ProceduralScene scene = scene_by_name(cfg.dataset.scene);
  const CircleTrajectory traj = cfg.require_trajectory();
  const FrameSequence seq =
      make_dataset(scene, traj, cfg.camera, cfg.dataset.n_views, cfg.gamma);
  save_frame_sequence(seq, cfg.resolve(cfg.dataset.dir));
  std::printf("dataset: %zu frames (%dx%d) -> %s\n", seq.frames.size(),
              cfg.camera.width, cfg.camera.height,
              cfg.resolve(cfg.dataset.dir).c_str());

  if (cfg.dataset.eval_views > 0) {
    const fs::path eval_dir = cfg.resolve(cfg.dataset.eval_dir);
    fs::create_directories(eval_dir);
    PoseManifest manifest;
    manifest.intrinsics = cfg.camera;
    const auto times =
        held_out_times(traj, cfg.dataset.eval_views, cfg.dataset.n_views);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const Pose pose = pose_at_time(traj, times[k]);
      const ViewImages gt = render_ground_truth(scene, cfg.camera, pose);
      char name[32];
      std::snprintf(name, sizeof(name), "view_%03zu.pfm", k);
      save_pfm(gt.rgb, eval_dir / name);
      std::snprintf(name, sizeof(name), "depth_%03zu.pfm", k);
      save_pfm(gt.depth, eval_dir / name);
      manifest.poses.push_back(pose);
      manifest.timestamps.push_back(times[k]);
    }
    save_pose_manifest(manifest, eval_dir / "poses.json");
    std::printf("dataset: %d held-out eval views -> %s\n",
                cfg.dataset.eval_views, eval_dir.c_str());
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  const FrameSequence seq =
      load_frame_sequence(cfg.resolve(cfg.simulator.frames_dir));
  SimulatorConfig sim;
  sim.delta = cfg.simulator.delta;
  sim.floor = cfg.simulator.floor;
  const int threads = cfg.effective_threads();

  const EventStream stream = simulate(seq, sim, threads);
  save_evt1(stream, cfg.resolve(cfg.simulator.out));
  std::printf("simulate: %zu events over %.6f s (%.3g ev/s, delta %.4g) -> %s\n",
              stream.events.size(), stream.duration,
              static_cast<double>(stream.events.size()) / stream.duration,
              sim.delta, cfg.resolve(cfg.simulator.out).c_str());

  if (!cfg.simulator.sweep_deltas.empty()) {
    const fs::path sweep_dir = cfg.resolve(cfg.simulator.sweep_dir);
    fs::create_directories(sweep_dir);
    std::ofstream csv(sweep_dir / "counts.csv");
    csv << "delta,events\n";
    for (double d : cfg.simulator.sweep_deltas) {
      SimulatorConfig sweep_cfg = sim;
      sweep_cfg.delta = d;
      const EventStream s = simulate(seq, sweep_cfg, threads);
      char name[48];
      std::snprintf(name, sizeof(name), "events_delta_%g.evt1", d);
      save_evt1(s, sweep_dir / name);
      csv << d << ',' << s.events.size() << '\n';
      std::printf("simulate: delta %.4g -> %zu events\n", d,
                  s.events.size());
    }
  }
  return 0;
}

RadianceGrid make_grid(const RunConfig& cfg) {
  RadianceGrid grid = RadianceGrid::create(
      cfg.train.grid_resolution[0], cfg.train.grid_resolution[1],
      cfg.train.grid_resolution[2], cfg.train.grid_bound_min,
      cfg.train.grid_bound_max);
  if (cfg.train.clip_enabled) grid.clip = cfg.train.clip;
  return grid;
}

long existing_curve_length(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) return 0;
  long rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line.find("iteration") == std::string::npos) ++rows;
  return rows;
}

int cmd_train(const RunConfig& cfg) {
  EventStream stream = load_evt1(cfg.resolve(cfg.train.events));
  const CircleTrajectory traj = cfg.require_trajectory();
  stream.loop_closed = trajectory_is_closed(traj);
  if (cfg.train.noise_fraction > 0)
    stream = inject_noise_fraction(stream, cfg.train.noise_fraction,
                                   cfg.seed);
  else if (cfg.train.noise_rate > 0)
    stream = inject_noise_rate(stream, cfg.train.noise_rate, cfg.seed);

  RadianceGrid grid;
  const bool resuming = !cfg.train.resume.empty();
  if (resuming)
    grid = load_rfg1(cfg.resolve(cfg.train.resume));
  else
    grid = make_grid(cfg);

  TrainConfig tc = cfg.train.train;
  tc.threads = cfg.effective_threads();

  const fs::path run_dir = cfg.resolve(cfg.train.run_dir);
  fs::create_directories(run_dir);
  save_run_config(cfg, run_dir / "config.json");

  const fs::path curve_path = run_dir / "loss.csv";
  const long start_iter = resuming ? existing_curve_length(curve_path) : 0;
  std::ofstream curve(curve_path, resuming ? std::ios::app : std::ios::out);
  if (!resuming) curve << "iteration,loss\n";

  const auto checkpoint = [&](int iteration, const RadianceGrid& g) {
    char name[48];
    std::snprintf(name, sizeof(name), "ckpt_%06ld.rfg1",
                  start_iter + iteration);
    save_rfg1(g, run_dir / name);
  };

  const TrainReport report =
      train(grid, stream, traj, cfg.camera, tc, checkpoint,
            cfg.train.checkpoint_interval);
  curve.precision(10);
  for (std::size_t i = 0; i < report.losses.size(); ++i)
    curve << start_iter + static_cast<long>(i) << ',' << report.losses[i]
          << '\n';
  save_rfg1(grid, run_dir / "checkpoint.rfg1");
  std::printf("train: %d iterations -> %s\n", tc.iterations,
              (run_dir / "checkpoint.rfg1").c_str());
  return 0;
}

void write_view(const ViewImages& view, const fs::path& dir,
                const std::string& stem, double gamma) {
  save_pfm(view.rgb, dir / (stem + ".pfm"));
  save_ppm(view.rgb, dir / (stem + ".ppm"), gamma);
  save_pfm(view.depth, dir / (stem + "_depth.pfm"));
}

int cmd_render(const RunConfig& cfg) {
  if (cfg.render.checkpoint.empty())
    throw DomainError("render: checkpoint path is required");
  const RadianceGrid grid = load_rfg1(cfg.resolve(cfg.render.checkpoint));
  const fs::path out_dir = cfg.resolve(cfg.render.out_dir);
  fs::create_directories(out_dir);
  const int threads = cfg.effective_threads();

  if (cfg.render.orbit_views > 0) {
    const CircleTrajectory traj = cfg.require_trajectory();
    for (int k = 0; k < cfg.render.orbit_views; ++k) {
      const double t = traj.t_start + traj.duration() * k /
                                          cfg.render.orbit_views;
      const ViewImages view =
          render_view(grid, cfg.camera, pose_at_time(traj, t),
                      cfg.render.sampling, cfg.background, threads, cfg.seed);
      char stem[32];
      std::snprintf(stem, sizeof(stem), "orbit_%03d", k);
      write_view(view, out_dir, stem, cfg.gamma);
    }
    std::printf("render: %d orbit views -> %s\n", cfg.render.orbit_views,
                out_dir.c_str());
    return 0;
  }

  Pose pose;
  if (!cfg.pose_manifest.empty() && !cfg.render.time) {
    const PoseManifest manifest =
        load_pose_manifest(cfg.resolve(cfg.pose_manifest));
    for (std::size_t k = 0; k < manifest.poses.size(); ++k) {
      const ViewImages view =
          render_view(grid, manifest.intrinsics, manifest.poses[k],
                      cfg.render.sampling, cfg.background, threads, cfg.seed);
      char stem[32];
      std::snprintf(stem, sizeof(stem), "view_%03zu", k);
      write_view(view, out_dir, stem, cfg.gamma);
    }
    std::printf("render: %zu manifest views -> %s\n",
                manifest.poses.size(), out_dir.c_str());
    return 0;
  }

  const double t = cfg.render.time.value_or(cfg.require_trajectory().t_start);
  pose = pose_at_time(cfg.require_trajectory(), t);
  const ViewImages view = render_view(grid, cfg.camera, pose,
                                      cfg.render.sampling, cfg.background,
                                      threads, cfg.seed);
  write_view(view, out_dir, "view", cfg.gamma);
  std::printf("render: t=%.6f -> %s\n", t, out_dir.c_str());
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  if (cfg.eval.checkpoint.empty())
    throw DomainError("eval: checkpoint path is required");
  const RadianceGrid grid = load_rfg1(cfg.resolve(cfg.eval.checkpoint));
  const fs::path gt_dir = cfg.resolve(cfg.eval.gt_dir);
  const PoseManifest manifest = load_pose_manifest(gt_dir / "poses.json");
  std::vector<Image> gts;
  for (std::size_t k = 0; k < manifest.poses.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03zu.pfm", k);
    gts.push_back(load_pfm(gt_dir / name));
  }
  const EvalReport report = evaluate_sequence(
      grid, manifest.intrinsics, manifest.poses, gts, cfg.gamma,
      cfg.eval.sampling, cfg.background, cfg.effective_threads());
  save_eval_report(report, cfg.resolve(cfg.eval.out));
  std::printf("eval: %zu views, mean PSNR %.2f dB, mean SSIM %.4f -> %s\n",
              report.view_psnr.size(), report.mean_psnr, report.mean_ssim,
              cfg.resolve(cfg.eval.out).c_str());
  return 0;
}

int cmd_calibrate(const RunConfig& cfg) {
  if (cfg.calibrate.poses.empty())
    throw DomainError("calibrate: pose manifest path is required");
  const PoseManifest manifest =
      load_pose_manifest(cfg.resolve(cfg.calibrate.poses));
  if (manifest.poses.empty())
    throw DomainError("calibrate: manifest has no explicit poses");
  CalibObservation obs;
  obs.poses = manifest.poses;
  CalibOptions opt;
  opt.iterations = cfg.calibrate.iterations;
  opt.learning_rate = cfg.calibrate.learning_rate;
  const CalibSolution sol = calibrate(obs, default_init(obs), opt);

  nlohmann::json j{{"tilt_alpha_rad", sol.tilt_alpha},
                   {"tilt_alpha_deg", sol.tilt_alpha * 180.0 / kPi},
                   {"center", {sol.center.x(), sol.center.y(),
                               sol.center.z()}},
                   {"radius", sol.radius},
                   {"residual", sol.residual}};
  std::ofstream out(cfg.resolve(cfg.calibrate.out));
  if (!out) throw IoError("calibrate: cannot write solution file");
  out << j.dump(2) << "\n";

  PoseManifest corrected = manifest;
  corrected.poses = correct_poses(manifest.poses, sol);
  save_pose_manifest(corrected, cfg.resolve(cfg.calibrate.corrected));
  std::printf(
      "calibrate: alpha %.6f deg, radius %.6f, residual %.3g -> %s\n",
      sol.tilt_alpha * 180.0 / kPi, sol.radius, sol.residual,
      cfg.resolve(cfg.calibrate.out).c_str());
  return 0;
}

int cmd_accumview(const RunConfig& cfg) {
  const EventStream stream = load_evt1(cfg.resolve(cfg.accumview.events));
  const AccumFrame frame =
      accumulate(stream, cfg.accumview.t0, cfg.accumview.t);
  // Signed colormap: positive sums in red, negative in blue, zero gray.
  double peak = 3.0 * stream.delta;
  for (double v : frame.values) peak = std::max(peak, std::abs(v));
  Image img = Image::zeros(frame.width, frame.height, 3);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      const double v = frame.value_at(x, y) / peak;
      const double mag = std::min(std::abs(v), 1.0);
      if (v > 0) {
        img.at(x, y, 0) = 0.5 + 0.5 * mag;
        img.at(x, y, 1) = 0.5 - 0.5 * mag;
        img.at(x, y, 2) = 0.5 - 0.5 * mag;
      } else if (v < 0) {
        img.at(x, y, 0) = 0.5 - 0.5 * mag;
        img.at(x, y, 1) = 0.5 - 0.5 * mag;
        img.at(x, y, 2) = 0.5 + 0.5 * mag;
      } else {
        img.at(x, y, 0) = img.at(x, y, 1) = img.at(x, y, 2) = 0.5;
      }
    }
  save_ppm(img, cfg.resolve(cfg.accumview.out), 1.0);
  std::printf("accumview: window (%.6f, %.6f] -> %s\n", cfg.accumview.t0,
              cfg.accumview.t, cfg.resolve(cfg.accumview.out).c_str());
  return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Event-stream radiance field reconstruction pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "Run configuration (JSON)")
      ->required();
  std::optional<int> threads_override;
  app.add_option("--threads", threads_override,
                 "Worker threads (1 = reproducibility mode)");
  std::optional<std::uint64_t> seed_override;
  app.add_option("--seed", seed_override, "Root RNG seed override");
  std::optional<int> iterations_override;
  app.add_option("--iterations", iterations_override,
                 "Training iteration override");

  CLI::App* dataset = app.add_subcommand(
      "dataset", "Generate procedural scene frames and eval views");
  CLI::App* simulate =
      app.add_subcommand("simulate", "Convert frames to an event stream");
  CLI::App* train =
      app.add_subcommand("train", "Optimize a radiance grid from events");
  CLI::App* render =
      app.add_subcommand("render", "Render novel views from a checkpoint");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "Recover turntable tilt/circle from pose estimates");
  CLI::App* accumview = app.add_subcommand(
      "accumview", "Visualize accumulated event polarities");

  std::vector<const char*> argv;
  argv.push_back("evrf");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    if (threads_override) cfg.threads = *threads_override;
    if (seed_override) {
      cfg.seed = *seed_override;
      cfg.train.train.rng_seed = *seed_override;
    }
    if (iterations_override) cfg.train.train.iterations =
        *iterations_override;

    if (dataset->parsed()) return cmd_dataset(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (render->parsed()) return cmd_render(cfg);
    if (eval->parsed()) return cmd_eval(cfg);
    if (calibrate->parsed()) return cmd_calibrate(cfg);
    if (accumview->parsed()) return cmd_accumview(cfg);
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

} // namespace evrf
