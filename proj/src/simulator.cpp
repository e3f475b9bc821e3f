#include "evrf/simulator.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evrf/errors.hpp"

namespace evrf {

void FrameSequence::validate() const {
  if (frames.size() < 2)
    throw DomainError("frame sequence: need at least 2 frames");
  if (frames.size() != timestamps.size())
    throw DomainError("frame sequence: frame/timestamp count mismatch");
  if (gamma <= 0) throw DomainError("frame sequence: gamma must be > 0");
  for (std::size_t i = 1; i < timestamps.size(); ++i)
    if (!(timestamps[i] > timestamps[i - 1]))
      throw DomainError("frame sequence: timestamps must strictly increase");
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (!frames[i].same_shape(frames[0]))
      throw DomainError("frame sequence: frame shapes differ");
  if (timestamps.front() < 0)
    throw DomainError("frame sequence: timestamps must start at >= 0");
}

bool FrameSequence::loop_closed() const {
  return frames.size() >= 2 && frames.front().data == frames.back().data;
}

void SimulatorConfig::validate() const {
  if (delta <= 0) throw DomainError("simulator: threshold must be > 0");
  if (floor <= 0) throw DomainError("simulator: floor must be > 0");
}

Image log_image(const Image& frame, double g, double floor) {
  if (g <= 0) throw DomainError("log_image: gamma must be > 0");
  Image out = frame;
  for (double& v : out.data) v = std::log(std::max(v, floor)) / g;
  return out;
}

namespace {

// Threshold-crossing scan of one pixel's interpolated log signal.
void simulate_pixel(const FrameSequence& seq, double delta, double floor,
                    int x, int y, int channel,
                    std::vector<EventTuple>& out) {
  const double g = seq.gamma;
  auto log_value = [&](std::size_t k) {
    return std::log(std::max(seq.frames[k].at(x, y, channel), floor)) / g;
  };
  double prev = log_value(0);
  double ref = prev;
  for (std::size_t k = 1; k < seq.frames.size(); ++k) {
    const double cur = log_value(k);
    if (cur == prev) {
      prev = cur;
      continue;
    }
    const double p = cur > prev ? 1.0 : -1.0;
    // Crossings landing exactly on a frame value are admitted within a
    // relative tolerance of the threshold.
    const double tol = 1e-9 * delta;
    double cross = ref + p * delta;
    while (p > 0 ? cross <= cur + tol : cross >= cur - tol) {
      const double frac =
          std::min(1.0, (cross - prev) / (cur - prev));
      EventTuple e;
      e.t = seq.timestamps[k - 1] +
            frac * (seq.timestamps[k] - seq.timestamps[k - 1]);
      e.x = static_cast<std::uint16_t>(x);
      e.y = static_cast<std::uint16_t>(y);
      e.p = p > 0 ? 1 : -1;
      out.push_back(e);
      ref = cross;
      cross += p * delta;
    }
    prev = cur;
  }
}

} // namespace

EventStream simulate(const FrameSequence& seq, const SimulatorConfig& cfg,
                     int threads) {
  seq.validate();
  cfg.validate();
  const int width = seq.frames[0].width;
  const int height = seq.frames[0].height;
  const int channels = seq.frames[0].channels;
  BayerMask mask = cfg.bayer;
  if (mask.width != width || mask.height != height)
    mask = BayerMask::rggb(width, height);

  // Pixels are independent; per-pixel buffers are flattened in pixel order,
  // so the merged stream does not depend on the thread count.
  std::vector<std::vector<EventTuple>> per_pixel(
      static_cast<std::size_t>(width) * height);

  auto run_pixel = [&](int idx) {
    const int x = idx % width;
    const int y = idx / width;
    const int channel =
        channels == 1 ? 0 : (mask.monochrome ? 0 : mask.channel(x, y));
    simulate_pixel(seq, cfg.delta, cfg.floor, x, y, channel, per_pixel[idx]);
  };

  const int n_pixels = width * height;
  if (threads <= 1) {
    for (int i = 0; i < n_pixels; ++i) run_pixel(i);
  } else {
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(static)
    for (int i = 0; i < n_pixels; ++i) run_pixel(i);
#else
    for (int i = 0; i < n_pixels; ++i) run_pixel(i);
#endif
  }

  EventStream stream;
  stream.width = width;
  stream.height = height;
  stream.delta = cfg.delta;
  stream.duration = seq.timestamps.back();
  stream.loop_closed = seq.loop_closed();
  std::size_t total = 0;
  for (const auto& v : per_pixel) total += v.size();
  stream.events.reserve(total);
  for (const auto& v : per_pixel)
    stream.events.insert(stream.events.end(), v.begin(), v.end());
  // Stable sort: ties keep pixel order, then per-pixel emission order.
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const EventTuple& a, const EventTuple& b) {
                     return a.t < b.t;
                   });
  return stream;
}

std::vector<std::pair<double, std::size_t>> sweep_threshold(
    const FrameSequence& seq, const std::vector<double>& deltas,
    int threads) {
  std::vector<std::pair<double, std::size_t>> counts;
  counts.reserve(deltas.size());
  for (double d : deltas) {
    SimulatorConfig cfg;
    cfg.delta = d;
    counts.emplace_back(d, simulate(seq, cfg, threads).events.size());
  }
  return counts;
}

} // namespace evrf
