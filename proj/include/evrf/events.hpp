#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace evrf {

struct EventTuple {
  double t = 0;         // seconds
  std::uint16_t x = 0;  // pixel column
  std::uint16_t y = 0;  // pixel row
  std::int8_t p = 1;    // polarity, -1 or +1
};

/// Time-ordered event stream with its generation threshold.
/// `loop_closed` marks turntable-style captures whose content is periodic
/// in `duration`; window accumulation may then wrap across t = 0.
struct EventStream {
  std::vector<EventTuple> events;
  int width = 0;
  int height = 0;
  double delta = 0;    // log-intensity quantum per event
  double duration = 0; // seconds
  bool loop_closed = false;

  void validate() const;
};

/// Per-pixel colour filter. The 2x2 tile holds channel indices addressed as
/// pattern[y % 2][x % 2]. `monochrome` marks the grayscale-supervision mode
/// where one value drives all three channels.
struct BayerMask {
  std::array<std::array<int, 2>, 2> pattern{{{0, 1}, {1, 2}}}; // RGGB
  int width = 0;
  int height = 0;
  bool monochrome = false;

  static BayerMask rggb(int w, int h);
  static BayerMask all_channels(int w, int h);

  /// Channel observed by pixel (x, y). Throws DomainError out of bounds.
  int channel(int x, int y) const;
};

/// Signed per-pixel polarity sums over one window, scaled by the threshold:
/// values[i] = delta * counts[i]. Counts are kept so zero tests are exact.
struct AccumFrame {
  int width = 0;
  int height = 0;
  double delta = 0;
  double t0 = 0;
  double t1 = 0;
  std::vector<int> counts;
  std::vector<double> values;
  BayerMask mask;

  int count_at(int x, int y) const {
    return counts[static_cast<std::size_t>(y) * width + x];
  }
  double value_at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

/// Draws supervision windows: window i ends at t = duration * i / n_windows
/// and starts uniformly in [t - l_max, t). With a fixed_length > 0 the start
/// is pinned to t - fixed_length instead (ablation mode).
struct WindowSampler {
  int n_windows = 1000;
  double l_max = 0.1;
  double duration = 1.0;
  bool loop_closed = false;
  std::uint64_t rng_seed = 0;
  double fixed_length = 0;

  void validate() const;
};

/// Sum event polarities over (t0, t] into a frame. For loop-closed streams a
/// negative t0 wraps: events from (duration + t0, duration] are included.
AccumFrame accumulate(const EventStream& stream, double t0, double t,
                      const BayerMask* mask = nullptr);

/// Window bounds for index i in [1, n_windows]. Deterministic per (seed, i).
std::pair<double, double> sample_window(const WindowSampler& ws, int i);

struct RaySelection {
  std::vector<std::int32_t> positive; // linear pixel indices, value != 0
  std::vector<std::int32_t> negative; // sampled from zero-valued pixels
  bool empty() const { return positive.empty(); }
};

/// Positive pixels are all with a non-zero polarity sum; ceil(beta * N_e)
/// negatives are drawn uniformly without replacement from the rest (all of
/// them if fewer exist). An all-zero frame yields an empty selection.
RaySelection select_rays(const AccumFrame& frame, double beta,
                         std::uint64_t seed);

/// Add `count` uniform random events (uniform t, x, y; equiprobable
/// polarity) and re-sort by time. Original events survive as a subsequence.
EventStream inject_noise_count(const EventStream& stream, std::size_t count,
                               std::uint64_t seed);
EventStream inject_noise_fraction(const EventStream& stream, double fraction,
                                  std::uint64_t seed);
EventStream inject_noise_rate(const EventStream& stream,
                              double events_per_second, std::uint64_t seed);

// Binary "EVT1" codec: 16-byte little-endian header (magic, u16 width,
// u16 height, f32 delta, f32 duration) then packed 13-byte records
// (f64 t, u16 x, u16 y, i8 p). Round-trips bit-exactly.
void save_evt1(const EventStream& stream, const std::filesystem::path& path);
EventStream load_evt1(const std::filesystem::path& path);

// CSV interop codec with a "t,x,y,p" header line. Sensor geometry and the
// threshold are not part of the file; `duration` <= 0 means "last event".
void save_events_csv(const EventStream& stream,
                     const std::filesystem::path& path);
EventStream load_events_csv(const std::filesystem::path& path, int width,
                            int height, double delta, double duration = 0);

} // namespace evrf
