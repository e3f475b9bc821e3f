#include "evrf/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>

#include "evrf/errors.hpp"
#include "evrf/rng.hpp"

namespace evrf {

void EventStream::validate() const {
  if (width < 1 || height < 1)
    throw DomainError("event stream: bad resolution");
  if (delta <= 0) throw DomainError("event stream: threshold must be > 0");
  if (duration <= 0) throw DomainError("event stream: duration must be > 0");
  double prev = 0;
  for (const EventTuple& e : events) {
    if (e.p != 1 && e.p != -1)
      throw DomainError("event stream: polarity must be +-1");
    if (e.x >= width || e.y >= height)
      throw DomainError("event stream: event outside sensor");
    if (e.t < prev || e.t < 0 || e.t > duration)
      throw DomainError("event stream: timestamps not sorted within range");
    prev = e.t;
  }
}

BayerMask BayerMask::rggb(int w, int h) {
  BayerMask m;
  m.width = w;
  m.height = h;
  return m;
}

BayerMask BayerMask::all_channels(int w, int h) {
  BayerMask m;
  m.width = w;
  m.height = h;
  m.monochrome = true;
  return m;
}

int BayerMask::channel(int x, int y) const {
  if (x < 0 || x >= width || y < 0 || y >= height)
    throw DomainError("bayer: pixel out of bounds");
  return pattern[y % 2][x % 2];
}

namespace {

// Index of the first event with t > bound.
std::size_t upper_bound_time(const std::vector<EventTuple>& events,
                             double bound) {
  return static_cast<std::size_t>(
      std::upper_bound(events.begin(), events.end(), bound,
                       [](double t, const EventTuple& e) { return t < e.t; }) -
      events.begin());
}

void add_range(const EventStream& stream, std::size_t first, std::size_t last,
               std::vector<int>& counts) {
  for (std::size_t i = first; i < last; ++i) {
    const EventTuple& e = stream.events[i];
    counts[static_cast<std::size_t>(e.y) * stream.width + e.x] += e.p;
  }
}

} // namespace

AccumFrame accumulate(const EventStream& stream, double t0, double t,
                      const BayerMask* mask) {
  if (!(t0 < t)) throw DomainError("accumulate: require t0 < t");
  if (t > stream.duration + 1e-12)
    throw DomainError("accumulate: window end beyond stream duration");
  if (t0 < 0 && !stream.loop_closed)
    throw DomainError("accumulate: negative t0 on a non-looped stream");
  if (t0 < -stream.duration)
    throw DomainError("accumulate: window wraps more than one period");

  AccumFrame frame;
  frame.width = stream.width;
  frame.height = stream.height;
  frame.delta = stream.delta;
  frame.t0 = t0;
  frame.t1 = t;
  frame.counts.assign(static_cast<std::size_t>(stream.width) * stream.height,
                      0);
  frame.mask = mask ? *mask : BayerMask::rggb(stream.width, stream.height);

  if (t0 >= 0) {
    add_range(stream, upper_bound_time(stream.events, t0),
              upper_bound_time(stream.events, t), frame.counts);
  } else {
    // Wrap-around: (t0, t] becomes (duration + t0, duration] union (0-, t].
    add_range(stream, upper_bound_time(stream.events, stream.duration + t0),
              stream.events.size(), frame.counts);
    add_range(stream, 0, upper_bound_time(stream.events, t), frame.counts);
  }

  frame.values.resize(frame.counts.size());
  for (std::size_t i = 0; i < frame.counts.size(); ++i)
    frame.values[i] = stream.delta * frame.counts[i];
  return frame;
}

void WindowSampler::validate() const {
  if (n_windows < 1) throw DomainError("window sampler: n_windows >= 1");
  if (!(l_max > 0) || l_max > duration)
    throw DomainError("window sampler: require 0 < l_max <= duration");
  if (fixed_length < 0 || fixed_length > duration)
    throw DomainError("window sampler: bad fixed_length");
}

std::pair<double, double> sample_window(const WindowSampler& ws, int i) {
  ws.validate();
  if (i < 1 || i > ws.n_windows)
    throw DomainError("sample_window: index out of range");
  const double t = ws.duration * static_cast<double>(i) / ws.n_windows;
  double t0;
  if (ws.fixed_length > 0) {
    t0 = t - ws.fixed_length;
  } else {
    Rng rng(derive_seed(ws.rng_seed, SeedStream::WindowSampler,
                        static_cast<std::uint64_t>(i)));
    t0 = t - ws.l_max * (1.0 - rng.uniform()); // uniform in [t - l_max, t)
  }
  if (!ws.loop_closed && t0 < 0) t0 = 0;
  return {t0, t};
}

RaySelection select_rays(const AccumFrame& frame, double beta,
                         std::uint64_t seed) {
  if (beta < 0) throw DomainError("select_rays: beta must be >= 0");
  RaySelection sel;
  std::vector<std::int32_t> zeros;
  zeros.reserve(frame.counts.size());
  for (std::size_t i = 0; i < frame.counts.size(); ++i) {
    if (frame.counts[i] != 0)
      sel.positive.push_back(static_cast<std::int32_t>(i));
    else
      zeros.push_back(static_cast<std::int32_t>(i));
  }
  if (sel.positive.empty()) return sel; // skip signal, not an error

  const std::size_t n_e = sel.positive.size();
  std::size_t wanted =
      static_cast<std::size_t>(std::ceil(beta * static_cast<double>(n_e) -
                                         1e-9));
  wanted = std::min(wanted, zeros.size());
  Rng rng(seed);
  for (std::size_t k = 0; k < wanted; ++k) {
    // partial Fisher-Yates
    const std::size_t j = k + rng.below(zeros.size() - k);
    std::swap(zeros[k], zeros[j]);
    sel.negative.push_back(zeros[k]);
  }
  return sel;
}

EventStream inject_noise_count(const EventStream& stream, std::size_t count,
                               std::uint64_t seed) {
  EventStream out = stream;
  out.events.reserve(stream.events.size() + count);
  Rng rng(derive_seed(seed, SeedStream::NoiseEvents));
  for (std::size_t i = 0; i < count; ++i) {
    EventTuple e;
    e.t = rng.uniform() * stream.duration;
    e.x = static_cast<std::uint16_t>(rng.below(stream.width));
    e.y = static_cast<std::uint16_t>(rng.below(stream.height));
    e.p = (rng.next() & 1) ? 1 : -1;
    out.events.push_back(e);
  }
  // Stable sort keeps the original events a subsequence.
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const EventTuple& a, const EventTuple& b) {
                     return a.t < b.t;
                   });
  return out;
}

EventStream inject_noise_fraction(const EventStream& stream, double fraction,
                                  std::uint64_t seed) {
  if (fraction < 0) throw DomainError("inject_noise: fraction must be >= 0");
  const auto count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(stream.events.size())));
  return inject_noise_count(stream, count, seed);
}

EventStream inject_noise_rate(const EventStream& stream,
                              double events_per_second, std::uint64_t seed) {
  if (events_per_second < 0)
    throw DomainError("inject_noise: rate must be >= 0");
  const auto count = static_cast<std::size_t>(
      std::llround(events_per_second * stream.duration));
  return inject_noise_count(stream, count, seed);
}

namespace {

constexpr char kEvtMagic[4] = {'E', 'V', 'T', '1'};

template <typename T>
void write_le(std::ofstream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

} // namespace

void save_evt1(const EventStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_evt1: cannot open " + path.string());
  out.write(kEvtMagic, 4);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.width));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.height));
  write_le<float>(out, static_cast<float>(stream.delta));
  float dur = static_cast<float>(stream.duration);
  if (!stream.events.empty() &&
      static_cast<double>(dur) < stream.events.back().t)
    dur = std::nextafter(dur, std::numeric_limits<float>::max());
  write_le<float>(out, dur);
  for (const EventTuple& e : stream.events) {
    write_le<double>(out, e.t);
    write_le<std::uint16_t>(out, e.x);
    write_le<std::uint16_t>(out, e.y);
    write_le<std::int8_t>(out, e.p);
  }
  if (!out) throw IoError("save_evt1: write failed for " + path.string());
}

EventStream load_evt1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_evt1: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kEvtMagic, 4) != 0)
    throw IoError("load_evt1: bad magic in " + path.string());
  EventStream stream;
  stream.width = read_le<std::uint16_t>(in);
  stream.height = read_le<std::uint16_t>(in);
  stream.delta = read_le<float>(in);
  stream.duration = read_le<float>(in);
  while (true) {
    EventTuple e;
    e.t = read_le<double>(in);
    e.x = read_le<std::uint16_t>(in);
    e.y = read_le<std::uint16_t>(in);
    e.p = read_le<std::int8_t>(in);
    if (!in) break;
    stream.events.push_back(e);
  }
  stream.validate();
  return stream;
}

void save_events_csv(const EventStream& stream,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_events_csv: cannot open " + path.string());
  out << "t,x,y,p\n";
  out.precision(17);
  for (const EventTuple& e : stream.events)
    out << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p)
        << '\n';
  if (!out) throw IoError("save_events_csv: write failed");
}

EventStream load_events_csv(const std::filesystem::path& path, int width,
                            int height, double delta, double duration) {
  std::ifstream in(path);
  if (!in) throw IoError("load_events_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,x,y,p", 0) != 0)
    throw IoError("load_events_csv: missing header line");
  EventStream stream;
  stream.width = width;
  stream.height = height;
  stream.delta = delta;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    EventTuple e;
    char comma;
    double t;
    int x, y, p;
    if (!(row >> t >> comma >> x >> comma >> y >> comma >> p))
      throw IoError("load_events_csv: malformed row: " + line);
    e.t = t;
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    e.p = static_cast<std::int8_t>(p);
    stream.events.push_back(e);
  }
  stream.duration = duration > 0 ? duration
                    : stream.events.empty() ? 1.0
                                            : stream.events.back().t;
  stream.validate();
  return stream;
}

} // namespace evrf
