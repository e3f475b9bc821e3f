#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evrf/geometry.hpp"
#include "evrf/simulator.hpp"

namespace evrf {

/// Camera description: intrinsics plus either an analytic circle trajectory
/// or an explicit timestamped pose list.
struct PoseManifest {
  CameraIntrinsics intrinsics;
  std::optional<CircleTrajectory> trajectory;
  std::vector<double> timestamps; // paired with `poses`
  std::vector<Pose> poses;

  void validate() const;
  Pose pose_at(double t) const; // trajectory if present, else exact lookup
};

void save_pose_manifest(const PoseManifest& manifest,
                        const std::filesystem::path& path);
PoseManifest load_pose_manifest(const std::filesystem::path& path);

/// Frame-sequence manifest: gamma, an sRGB flag for 8-bit inputs and the
/// timestamped image files (PFM or PPM) relative to the manifest directory.
struct FramesManifest {
  double gamma = 2.2;
  bool srgb_to_linear = false;
  std::vector<double> timestamps;
  std::vector<std::string> files;
};

void save_frames_manifest(const FramesManifest& manifest,
                          const std::filesystem::path& path);
FramesManifest load_frames_manifest(const std::filesystem::path& path);

/// Write a frame sequence as numbered PFM files plus its manifest.
void save_frame_sequence(const FrameSequence& seq,
                         const std::filesystem::path& dir);
/// Load the sequence described by dir/frames.json.
FrameSequence load_frame_sequence(const std::filesystem::path& dir);

} // namespace evrf
