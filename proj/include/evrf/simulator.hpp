#pragma once

#include <utility>
#include <vector>

#include "evrf/events.hpp"
#include "evrf/image.hpp"

namespace evrf {

/// Posed RGB frames in linear light with strictly increasing timestamps.
struct FrameSequence {
  std::vector<Image> frames;
  std::vector<double> timestamps; // seconds
  double gamma = 2.2;

  void validate() const;
  bool loop_closed() const; // first frame identical to the last
};

struct SimulatorConfig {
  double delta = 0.1;   // event generation threshold [log units]
  double floor = 1e-4;  // intensity clamp before the log
  BayerMask bayer;      // sized lazily to the frames if left empty

  void validate() const;
};

/// Per-pixel log intensity: ln(max(value, floor)) / g.
Image log_image(const Image& frame, double g, double floor);

/// Convert frames into a colour event stream. Each pixel observes only its
/// Bayer channel; log intensity is linearly interpolated between frames and
/// an event fires at each threshold crossing, moving the reference level by
/// one polarity-signed quantum. Output is time-sorted with a deterministic
/// pixel-order tie-break, identical for any thread count.
EventStream simulate(const FrameSequence& frames, const SimulatorConfig& cfg,
                     int threads = 1);

/// Event counts per threshold.
std::vector<std::pair<double, std::size_t>> sweep_threshold(
    const FrameSequence& frames, const std::vector<double>& deltas,
    int threads = 1);

} // namespace evrf
