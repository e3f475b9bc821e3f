#include "evrf/config.hpp"

#include <fstream>
#include <thread>

#include <json.hpp>

#include "evrf/errors.hpp"

namespace evrf {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : known)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw DomainError("config: unknown key '" + item.key() + "' in " +
                        where);
  }
}

Vec3 vec3_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw DomainError("config: " + where + " must be a 3-array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to(const Vec3& v) { return json{v.x(), v.y(), v.z()}; }

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_sampling(const json& j, SamplingConfig& s,
                    const std::string& where) {
  reject_unknown(j, {"n_samples", "stratified", "importance_resample"},
                 where);
  get_if(j, "n_samples", s.n_samples);
  get_if(j, "stratified", s.stratified);
  get_if(j, "importance_resample", s.importance_resample);
  s.validate();
}

} // namespace

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

CircleTrajectory RunConfig::require_trajectory() const {
  if (trajectory) return *trajectory;
  throw DomainError("config: this command needs a 'trajectory' section");
}

int RunConfig::effective_threads() const {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

CircleTrajectory default_trajectory() {
  CircleTrajectory traj;
  traj.center = Vec3::Zero();
  traj.radius = 4.0;
  traj.altitude_angle = 30.0 * kPi / 180.0;
  traj.angular_velocity = 2.0 * kPi;
  traj.t_start = 0.0;
  traj.t_end = 1.0;
  return traj;
}

ProceduralScene scene_by_name(const std::string& name) {
  if (name == "tricolour-sphere") return tricolour_sphere_scene();
  throw DomainError("config: unknown scene '" + name + "'");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("config: parse error: " + std::string(e.what()));
  }

  reject_unknown(j,
                 {"seed", "threads", "camera", "trajectory", "pose_manifest",
                  "background", "gamma", "dataset", "simulator", "train",
                  "render", "eval", "calibrate", "accumview"},
                 "top level");

  RunConfig cfg;
  cfg.base_dir = path.has_parent_path() ? path.parent_path()
                                        : std::filesystem::path(".");
  get_if(j, "seed", cfg.seed);
  get_if(j, "threads", cfg.threads);
  get_if(j, "gamma", cfg.gamma);
  if (cfg.gamma <= 0) throw DomainError("config: gamma must be > 0");
  get_if(j, "pose_manifest", cfg.pose_manifest);

  if (j.contains("camera")) {
    const json& c = j.at("camera");
    reject_unknown(c, {"fx", "fy", "cx", "cy", "width", "height"}, "camera");
    get_if(c, "fx", cfg.camera.fx);
    get_if(c, "fy", cfg.camera.fy);
    get_if(c, "cx", cfg.camera.cx);
    get_if(c, "cy", cfg.camera.cy);
    get_if(c, "width", cfg.camera.width);
    get_if(c, "height", cfg.camera.height);
  }
  cfg.camera.validate();

  if (j.contains("trajectory")) {
    const json& t = j.at("trajectory");
    reject_unknown(t,
                   {"center", "radius", "altitude_angle", "angular_velocity",
                    "t_start", "t_end"},
                   "trajectory");
    CircleTrajectory traj = default_trajectory();
    if (t.contains("center")) traj.center = vec3_from(t["center"], "center");
    get_if(t, "radius", traj.radius);
    get_if(t, "altitude_angle", traj.altitude_angle);
    get_if(t, "angular_velocity", traj.angular_velocity);
    get_if(t, "t_start", traj.t_start);
    get_if(t, "t_end", traj.t_end);
    traj.validate();
    cfg.trajectory = traj;
  } else {
    cfg.trajectory = default_trajectory();
  }

  if (j.contains("background")) {
    cfg.background.colour = vec3_from(j.at("background"), "background");
    for (int c = 0; c < 3; ++c)
      if (!(cfg.background.colour[c] > 0))
        throw DomainError("config: background must be positive (log-safe)");
  }

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown(d, {"scene", "n_views", "dir", "eval_views", "eval_dir"},
                   "dataset");
    get_if(d, "scene", cfg.dataset.scene);
    get_if(d, "n_views", cfg.dataset.n_views);
    get_if(d, "dir", cfg.dataset.dir);
    get_if(d, "eval_views", cfg.dataset.eval_views);
    get_if(d, "eval_dir", cfg.dataset.eval_dir);
    if (cfg.dataset.n_views < 2)
      throw DomainError("config: dataset.n_views must be >= 2");
  }

  if (j.contains("simulator")) {
    const json& s = j.at("simulator");
    reject_unknown(
        s, {"delta", "floor", "frames_dir", "out", "sweep_deltas",
            "sweep_dir"},
        "simulator");
    get_if(s, "delta", cfg.simulator.delta);
    get_if(s, "floor", cfg.simulator.floor);
    get_if(s, "frames_dir", cfg.simulator.frames_dir);
    get_if(s, "out", cfg.simulator.out);
    get_if(s, "sweep_dir", cfg.simulator.sweep_dir);
    if (s.contains("sweep_deltas"))
      cfg.simulator.sweep_deltas =
          s.at("sweep_deltas").get<std::vector<double>>();
    if (cfg.simulator.delta <= 0 || cfg.simulator.floor <= 0)
      throw DomainError("config: simulator delta/floor must be > 0");
    for (double d : cfg.simulator.sweep_deltas)
      if (d <= 0) throw DomainError("config: sweep deltas must be > 0");
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t,
                   {"iterations", "n_windows", "l_max", "fixed_window",
                    "beta", "learning_rate", "lr_final", "adam_beta1",
                    "adam_beta2", "adam_eps", "batch_rays", "log_floor",
                    "windows_per_step", "sampling", "events", "run_dir",
                    "resume", "noise_fraction", "noise_rate",
                    "checkpoint_interval", "grid_resolution",
                    "grid_bound_min", "grid_bound_max", "clip"},
                   "train");
    TrainConfig& tc = cfg.train.train;
    get_if(t, "iterations", tc.iterations);
    get_if(t, "n_windows", tc.n_windows);
    get_if(t, "l_max", tc.l_max);
    get_if(t, "fixed_window", tc.fixed_window);
    get_if(t, "beta", tc.beta);
    get_if(t, "learning_rate", tc.learning_rate);
    get_if(t, "lr_final", tc.lr_final);
    get_if(t, "adam_beta1", tc.adam_beta1);
    get_if(t, "adam_beta2", tc.adam_beta2);
    get_if(t, "adam_eps", tc.adam_eps);
    get_if(t, "batch_rays", tc.batch_rays);
    get_if(t, "log_floor", tc.log_floor);
    get_if(t, "windows_per_step", tc.windows_per_step);
    if (t.contains("sampling"))
      parse_sampling(t.at("sampling"), tc.sampling, "train.sampling");
    get_if(t, "events", cfg.train.events);
    get_if(t, "run_dir", cfg.train.run_dir);
    get_if(t, "resume", cfg.train.resume);
    get_if(t, "noise_fraction", cfg.train.noise_fraction);
    get_if(t, "noise_rate", cfg.train.noise_rate);
    get_if(t, "checkpoint_interval", cfg.train.checkpoint_interval);
    if (t.contains("grid_resolution")) {
      const json& r = t.at("grid_resolution");
      if (!r.is_array() || r.size() != 3)
        throw DomainError("config: grid_resolution must be a 3-array");
      for (int a = 0; a < 3; ++a)
        cfg.train.grid_resolution[a] = r[a].get<int>();
    }
    if (t.contains("grid_bound_min"))
      cfg.train.grid_bound_min = vec3_from(t["grid_bound_min"],
                                           "grid_bound_min");
    if (t.contains("grid_bound_max"))
      cfg.train.grid_bound_max = vec3_from(t["grid_bound_max"],
                                           "grid_bound_max");
    if (t.contains("clip")) {
      const json& c = t.at("clip");
      reject_unknown(c, {"enabled", "r_max", "z_min", "z_max"}, "clip");
      get_if(c, "enabled", cfg.train.clip_enabled);
      get_if(c, "r_max", cfg.train.clip.r_max);
      get_if(c, "z_min", cfg.train.clip.z_min);
      get_if(c, "z_max", cfg.train.clip.z_max);
      if (cfg.train.clip.r_max <= 0 ||
          !(cfg.train.clip.z_min < cfg.train.clip.z_max))
        throw DomainError("config: bad clip cylinder");
    }
    if (cfg.train.noise_fraction < 0 || cfg.train.noise_rate < 0)
      throw DomainError("config: noise amounts must be >= 0");
    tc.gamma = cfg.gamma;
    tc.background = cfg.background;
    tc.rng_seed = cfg.seed;
    tc.validate();
  }

  if (j.contains("render")) {
    const json& r = j.at("render");
    reject_unknown(r, {"checkpoint", "out_dir", "time", "orbit_views",
                       "sampling"},
                   "render");
    get_if(r, "checkpoint", cfg.render.checkpoint);
    get_if(r, "out_dir", cfg.render.out_dir);
    if (r.contains("time")) cfg.render.time = r.at("time").get<double>();
    get_if(r, "orbit_views", cfg.render.orbit_views);
    if (r.contains("sampling"))
      parse_sampling(r.at("sampling"), cfg.render.sampling,
                     "render.sampling");
    if (cfg.render.orbit_views < 0)
      throw DomainError("config: orbit_views must be >= 0");
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    reject_unknown(e, {"checkpoint", "gt_dir", "out", "sampling"}, "eval");
    get_if(e, "checkpoint", cfg.eval.checkpoint);
    get_if(e, "gt_dir", cfg.eval.gt_dir);
    get_if(e, "out", cfg.eval.out);
    if (e.contains("sampling"))
      parse_sampling(e.at("sampling"), cfg.eval.sampling, "eval.sampling");
  }

  if (j.contains("calibrate")) {
    const json& c = j.at("calibrate");
    reject_unknown(c, {"poses", "out", "corrected", "iterations",
                       "learning_rate"},
                   "calibrate");
    get_if(c, "poses", cfg.calibrate.poses);
    get_if(c, "out", cfg.calibrate.out);
    get_if(c, "corrected", cfg.calibrate.corrected);
    get_if(c, "iterations", cfg.calibrate.iterations);
    get_if(c, "learning_rate", cfg.calibrate.learning_rate);
    if (cfg.calibrate.iterations < 1 || cfg.calibrate.learning_rate <= 0)
      throw DomainError("config: bad calibrate options");
  }

  if (j.contains("accumview")) {
    const json& a = j.at("accumview");
    reject_unknown(a, {"events", "t0", "t", "out"}, "accumview");
    get_if(a, "events", cfg.accumview.events);
    get_if(a, "t0", cfg.accumview.t0);
    get_if(a, "t", cfg.accumview.t);
    get_if(a, "out", cfg.accumview.out);
  }

  if (cfg.threads < 0) throw DomainError("config: threads must be >= 0");
  return cfg;
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["gamma"] = cfg.gamma;
  j["camera"] = json{{"fx", cfg.camera.fx},       {"fy", cfg.camera.fy},
                     {"cx", cfg.camera.cx},       {"cy", cfg.camera.cy},
                     {"width", cfg.camera.width}, {"height",
                                                   cfg.camera.height}};
  if (cfg.trajectory) {
    const CircleTrajectory& t = *cfg.trajectory;
    j["trajectory"] = json{{"center", vec3_to(t.center)},
                           {"radius", t.radius},
                           {"altitude_angle", t.altitude_angle},
                           {"angular_velocity", t.angular_velocity},
                           {"t_start", t.t_start},
                           {"t_end", t.t_end}};
  }
  j["background"] = vec3_to(cfg.background.colour);
  const TrainConfig& tc = cfg.train.train;
  j["train"] = json{
      {"iterations", tc.iterations},
      {"n_windows", tc.n_windows},
      {"l_max", tc.l_max},
      {"fixed_window", tc.fixed_window},
      {"beta", tc.beta},
      {"learning_rate", tc.learning_rate},
      {"lr_final", tc.lr_final},
      {"adam_beta1", tc.adam_beta1},
      {"adam_beta2", tc.adam_beta2},
      {"adam_eps", tc.adam_eps},
      {"batch_rays", tc.batch_rays},
      {"log_floor", tc.log_floor},
      {"windows_per_step", tc.windows_per_step},
      {"sampling", json{{"n_samples", tc.sampling.n_samples},
                        {"stratified", tc.sampling.stratified},
                        {"importance_resample",
                         tc.sampling.importance_resample}}},
      {"events", cfg.train.events},
      {"run_dir", cfg.train.run_dir},
      {"noise_fraction", cfg.train.noise_fraction},
      {"noise_rate", cfg.train.noise_rate},
      {"checkpoint_interval", cfg.train.checkpoint_interval},
      {"grid_resolution",
       json{cfg.train.grid_resolution[0], cfg.train.grid_resolution[1],
            cfg.train.grid_resolution[2]}},
      {"grid_bound_min", vec3_to(cfg.train.grid_bound_min)},
      {"grid_bound_max", vec3_to(cfg.train.grid_bound_max)},
      {"clip", json{{"enabled", cfg.train.clip_enabled},
                    {"r_max", cfg.train.clip.r_max},
                    {"z_min", cfg.train.clip.z_min},
                    {"z_max", cfg.train.clip.z_max}}}};
  std::ofstream out(path);
  if (!out) throw IoError("save_run_config: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

} // namespace evrf
