#include "evrf/manifest.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "evrf/errors.hpp"

namespace evrf {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*>
                                              known,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : known)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw DomainError("manifest: unknown key '" + item.key() + "' in " +
                        where);
  }
}

json intrinsics_to_json(const CameraIntrinsics& cam) {
  return json{{"fx", cam.fx},       {"fy", cam.fy},
              {"cx", cam.cx},       {"cy", cam.cy},
              {"width", cam.width}, {"height", cam.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  reject_unknown_keys(j, {"fx", "fy", "cx", "cy", "width", "height"},
                      "intrinsics");
  CameraIntrinsics cam;
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  cam.validate();
  return cam;
}

json trajectory_to_json(const CircleTrajectory& traj) {
  return json{{"center", {traj.center.x(), traj.center.y(), traj.center.z()}},
              {"radius", traj.radius},
              {"altitude_angle", traj.altitude_angle},
              {"angular_velocity", traj.angular_velocity},
              {"t_start", traj.t_start},
              {"t_end", traj.t_end}};
}

CircleTrajectory trajectory_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"center", "radius", "altitude_angle",
                       "angular_velocity", "t_start", "t_end"},
                      "trajectory");
  CircleTrajectory traj;
  const auto c = j.at("center");
  if (!c.is_array() || c.size() != 3)
    throw DomainError("manifest: trajectory center must be a 3-array");
  traj.center = Vec3(c[0].get<double>(), c[1].get<double>(),
                     c[2].get<double>());
  traj.radius = j.at("radius").get<double>();
  traj.altitude_angle = j.at("altitude_angle").get<double>();
  traj.angular_velocity = j.at("angular_velocity").get<double>();
  traj.t_start = j.at("t_start").get<double>();
  traj.t_end = j.at("t_end").get<double>();
  traj.validate();
  return traj;
}

} // namespace

void PoseManifest::validate() const {
  intrinsics.validate();
  if (trajectory) trajectory->validate();
  if (poses.size() != timestamps.size())
    throw DomainError("manifest: pose/timestamp count mismatch");
  for (const Pose& p : poses)
    if (!p.orthonormal(1e-6))
      throw DomainError("manifest: non-orthonormal rotation");
  if (!trajectory && poses.empty())
    throw DomainError("manifest: needs a trajectory or poses");
}

Pose PoseManifest::pose_at(double t) const {
  if (trajectory) return pose_at_time(*trajectory, t);
  for (std::size_t i = 0; i < timestamps.size(); ++i)
    if (std::abs(timestamps[i] - t) < 1e-12) return poses[i];
  throw DomainError("manifest: no pose recorded at t=" + std::to_string(t));
}

void save_pose_manifest(const PoseManifest& manifest,
                        const std::filesystem::path& path) {
  manifest.validate();
  json j;
  j["intrinsics"] = intrinsics_to_json(manifest.intrinsics);
  if (manifest.trajectory)
    j["trajectory"] = trajectory_to_json(*manifest.trajectory);
  if (!manifest.poses.empty()) {
    json poses = json::array();
    for (std::size_t i = 0; i < manifest.poses.size(); ++i) {
      const Pose& p = manifest.poses[i];
      json rot = json::array();
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot.push_back(p.rotation(r, c));
      poses.push_back(json{{"t", manifest.timestamps[i]},
                           {"rotation", rot},
                           {"translation",
                            {p.translation.x(), p.translation.y(),
                             p.translation.z()}}});
    }
    j["poses"] = poses;
  }
  std::ofstream out(path);
  if (!out) throw IoError("save_pose_manifest: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

PoseManifest load_pose_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_pose_manifest: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("load_pose_manifest: " + std::string(e.what()));
  }
  reject_unknown_keys(j, {"intrinsics", "trajectory", "poses"},
                      "pose manifest");
  PoseManifest manifest;
  manifest.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  if (j.contains("trajectory"))
    manifest.trajectory = trajectory_from_json(j.at("trajectory"));
  if (j.contains("poses")) {
    for (const json& entry : j.at("poses")) {
      reject_unknown_keys(entry, {"t", "rotation", "translation"}, "pose");
      Pose p;
      const auto rot = entry.at("rotation");
      if (!rot.is_array() || rot.size() != 9)
        throw DomainError("manifest: rotation must be a 9-array (row-major)");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          p.rotation(r, c) = rot[3 * r + c].get<double>();
      const auto tr = entry.at("translation");
      if (!tr.is_array() || tr.size() != 3)
        throw DomainError("manifest: translation must be a 3-array");
      p.translation = Vec3(tr[0].get<double>(), tr[1].get<double>(),
                           tr[2].get<double>());
      manifest.poses.push_back(p);
      manifest.timestamps.push_back(entry.at("t").get<double>());
    }
  }
  manifest.validate();
  return manifest;
}

void save_frames_manifest(const FramesManifest& manifest,
                          const std::filesystem::path& path) {
  json frames = json::array();
  for (std::size_t i = 0; i < manifest.files.size(); ++i)
    frames.push_back(
        json{{"t", manifest.timestamps[i]}, {"file", manifest.files[i]}});
  json j{{"gamma", manifest.gamma},
         {"srgb_to_linear", manifest.srgb_to_linear},
         {"frames", frames}};
  std::ofstream out(path);
  if (!out)
    throw IoError("save_frames_manifest: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

FramesManifest load_frames_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("load_frames_manifest: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("load_frames_manifest: " + std::string(e.what()));
  }
  reject_unknown_keys(j, {"gamma", "srgb_to_linear", "frames"},
                      "frames manifest");
  FramesManifest manifest;
  manifest.gamma = j.at("gamma").get<double>();
  if (j.contains("srgb_to_linear"))
    manifest.srgb_to_linear = j.at("srgb_to_linear").get<bool>();
  for (const json& entry : j.at("frames")) {
    reject_unknown_keys(entry, {"t", "file"}, "frame entry");
    manifest.timestamps.push_back(entry.at("t").get<double>());
    manifest.files.push_back(entry.at("file").get<std::string>());
  }
  return manifest;
}

void save_frame_sequence(const FrameSequence& seq,
                         const std::filesystem::path& dir) {
  seq.validate();
  std::filesystem::create_directories(dir);
  FramesManifest manifest;
  manifest.gamma = seq.gamma;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06zu.pfm", i);
    save_pfm(seq.frames[i], dir / name);
    manifest.files.emplace_back(name);
    manifest.timestamps.push_back(seq.timestamps[i]);
  }
  save_frames_manifest(manifest, dir / "frames.json");
}

FrameSequence load_frame_sequence(const std::filesystem::path& dir) {
  const FramesManifest manifest = load_frames_manifest(dir / "frames.json");
  FrameSequence seq;
  seq.gamma = manifest.gamma;
  seq.timestamps = manifest.timestamps;
  for (const std::string& file : manifest.files) {
    const std::filesystem::path p = dir / file;
    if (p.extension() == ".pfm") {
      seq.frames.push_back(load_pfm(p));
    } else if (p.extension() == ".ppm") {
      seq.frames.push_back(load_ppm(p, manifest.srgb_to_linear));
    } else {
      throw IoError("load_frame_sequence: unsupported format " + p.string());
    }
  }
  seq.validate();
  return seq;
}

} // namespace evrf
