#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evrf/geometry.hpp"
#include "evrf/renderer.hpp"
#include "evrf/scenes.hpp"
#include "evrf/trainer.hpp"
#include "evrf/types.hpp"

namespace evrf {

struct DatasetConfig {
  std::string scene = "tricolour-sphere";
  int n_views = 300;
  std::string dir = "frames";
  int eval_views = 8;
  std::string eval_dir = "eval";
};

struct SimulatorSection {
  double delta = 0.1;
  double floor = 1e-4;
  std::string frames_dir = "frames";
  std::string out = "events.evt1";
  std::vector<double> sweep_deltas;
  std::string sweep_dir = "sweep";
};

struct TrainSection {
  TrainConfig train;
  std::string events = "events.evt1";
  std::string run_dir = "run";
  std::string resume;
  double noise_fraction = 0;
  double noise_rate = 0;
  int checkpoint_interval = 0;
  Eigen::Vector3i grid_resolution{64, 64, 64};
  Vec3 grid_bound_min{-0.5, -0.5, -0.5};
  Vec3 grid_bound_max{0.5, 0.5, 0.5};
  bool clip_enabled = true;
  CylinderClip clip;
};

struct RenderSection {
  std::string checkpoint;
  std::string out_dir = "renders";
  std::optional<double> time;
  int orbit_views = 0;
  SamplingConfig sampling{64, false, 0};
};

struct EvalSection {
  std::string checkpoint;
  std::string gt_dir = "eval";
  std::string out = "eval.csv";
  SamplingConfig sampling{64, false, 0};
};

struct CalibrateSection {
  std::string poses;
  std::string out = "calibration.json";
  std::string corrected = "poses_corrected.json";
  int iterations = 40000;
  double learning_rate = 3e-2;
};

struct AccumviewSection {
  std::string events = "events.evt1";
  double t0 = 0;
  double t = 0.05;
  std::string out = "accum.ppm";
};

/// One configuration document for the whole pipeline. Every field is
/// validated against its module's invariants at load; unknown keys are
/// rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 0; // 0 = all hardware threads
  CameraIntrinsics camera{180, 180, 48, 48, 96, 96};
  std::optional<CircleTrajectory> trajectory;
  std::string pose_manifest;
  Background background;
  double gamma = 2.2;
  DatasetConfig dataset;
  SimulatorSection simulator;
  TrainSection train;
  RenderSection render;
  EvalSection eval;
  CalibrateSection calibrate;
  AccumviewSection accumview;

  /// Directory of the config file; relative paths resolve against it.
  std::filesystem::path base_dir = ".";

  std::filesystem::path resolve(const std::string& path) const;
  CircleTrajectory require_trajectory() const;
  int effective_threads() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Default full-circle orbit over one second.
CircleTrajectory default_trajectory();

/// Named procedural scene ("tricolour-sphere").
ProceduralScene scene_by_name(const std::string& name);

} // namespace evrf
