#include "evrf/field.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "evrf/errors.hpp"

namespace evrf {

CylinderClip default_clip() { return CylinderClip{0.25, -0.35, 0.15}; }

void GradBuffer::resize_for(const RadianceGrid& grid) {
  density.assign(grid.cell_count(), 0.0);
  rgb.assign(grid.cell_count() * 3, 0.0);
  touched.clear();
  touched_flag.assign(grid.cell_count(), 0);
}

void GradBuffer::clear() {
  for (std::int32_t i : touched) {
    density[i] = 0.0;
    rgb[3 * static_cast<std::size_t>(i) + 0] = 0.0;
    rgb[3 * static_cast<std::size_t>(i) + 1] = 0.0;
    rgb[3 * static_cast<std::size_t>(i) + 2] = 0.0;
    touched_flag[i] = 0;
  }
  touched.clear();
}

void GradBuffer::scale(double factor) {
  for (std::int32_t i : touched) {
    const auto k = static_cast<std::size_t>(i);
    density[k] *= factor;
    rgb[3 * k + 0] *= factor;
    rgb[3 * k + 1] *= factor;
    rgb[3 * k + 2] *= factor;
  }
}

void GradBuffer::drain_into(GradBuffer& other) {
  for (std::int32_t i : touched) {
    const auto k = static_cast<std::size_t>(i);
    other.density[k] += density[k];
    other.rgb[3 * k + 0] += rgb[3 * k + 0];
    other.rgb[3 * k + 1] += rgb[3 * k + 1];
    other.rgb[3 * k + 2] += rgb[3 * k + 2];
    if (!other.touched_flag[k]) {
      other.touched_flag[k] = 1;
      other.touched.push_back(i);
    }
  }
  clear();
}

RadianceGrid RadianceGrid::create(int nx, int ny, int nz,
                                  const Vec3& bound_min, const Vec3& bound_max,
                                  double sigma0) {
  RadianceGrid grid;
  grid.nx = nx;
  grid.ny = ny;
  grid.nz = nz;
  grid.bound_min = bound_min;
  grid.bound_max = bound_max;
  grid.validate();
  grid.raw_density.assign(grid.cell_count(),
                          static_cast<float>(softplus_inverse(sigma0)));
  grid.raw_rgb.assign(grid.cell_count() * 3, 0.0f);
  return grid;
}

void RadianceGrid::validate() const {
  if (nx < 2 || ny < 2 || nz < 2)
    throw DomainError("grid: resolution must be >= 2 per axis");
  for (int a = 0; a < 3; ++a)
    if (!(bound_min[a] < bound_max[a]))
      throw DomainError("grid: degenerate bounds");
  if (!raw_density.empty() && raw_density.size() != cell_count())
    throw DomainError("grid: density array size mismatch");
  if (!raw_rgb.empty() && raw_rgb.size() != cell_count() * 3)
    throw DomainError("grid: rgb array size mismatch");
}

namespace {

struct CellLookup {
  std::int32_t corner[8];
  double weight[8];
  bool in_bounds = false;
};

inline CellLookup locate(const RadianceGrid& g, const Vec3& x) {
  CellLookup cell;
  const int n[3] = {g.nx, g.ny, g.nz};
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    if (x[a] < g.bound_min[a] || x[a] > g.bound_max[a]) return cell;
    const double u = (x[a] - g.bound_min[a]) /
                     (g.bound_max[a] - g.bound_min[a]) * (n[a] - 1);
    int c = static_cast<int>(u);
    if (c > n[a] - 2) c = n[a] - 2;
    base[a] = c;
    frac[a] = u - c;
  }
  cell.in_bounds = true;
  int k = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx, ++k) {
        cell.corner[k] = static_cast<std::int32_t>(
            (static_cast<std::size_t>(base[2] + dz) * g.ny + (base[1] + dy)) *
                g.nx +
            (base[0] + dx));
        cell.weight[k] = (dx ? frac[0] : 1.0 - frac[0]) *
                         (dy ? frac[1] : 1.0 - frac[1]) *
                         (dz ? frac[2] : 1.0 - frac[2]);
      }
  return cell;
}

} // namespace

void RadianceGrid::query(const Vec3& x, FieldSample& out) const {
  out.has_stencil = false;
  out.sigma = 0;
  out.dsigma_draw = 0;
  out.drgb_draw.setZero();
  const CellLookup cell = locate(*this, x);
  if (!cell.in_bounds) {
    out.rgb = Vec3(0.5, 0.5, 0.5);
    return;
  }
  double raw_d = 0;
  double raw_c[3] = {0, 0, 0};
  for (int k = 0; k < 8; ++k) {
    const auto idx = static_cast<std::size_t>(cell.corner[k]);
    const double w = cell.weight[k];
    raw_d += w * raw_density[idx];
    raw_c[0] += w * raw_rgb[3 * idx + 0];
    raw_c[1] += w * raw_rgb[3 * idx + 1];
    raw_c[2] += w * raw_rgb[3 * idx + 2];
  }
  out.has_stencil = true;
  std::copy(cell.corner, cell.corner + 8, out.corner.begin());
  std::copy(cell.weight, cell.weight + 8, out.weight.begin());
  for (int c = 0; c < 3; ++c) {
    const double s = sigmoid(raw_c[c]);
    out.rgb[c] = s;
    out.drgb_draw[c] = s * (1.0 - s);
  }
  const bool clipped = clip && !clip->contains(x);
  if (clipped) {
    out.sigma = 0; // hard zero outside the support cylinder
    out.dsigma_draw = 0;
  } else {
    out.sigma = softplus(raw_d);
    out.dsigma_draw = sigmoid(raw_d);
  }
}

FieldSample RadianceGrid::query(const Vec3& x) const {
  FieldSample s;
  query(x, s);
  return s;
}

void RadianceGrid::accumulate_param_gradient(const Vec3& x,
                                             double dloss_dsigma,
                                             const Vec3& dloss_drgb,
                                             GradBuffer& grad) const {
  if (clip && !clip->contains(x)) return;
  FieldSample s;
  query(x, s);
  if (!s.has_stencil) return;
  const double dsig = dloss_dsigma * s.dsigma_draw;
  const Vec3 drgb = dloss_drgb.cwiseProduct(s.drgb_draw);
  for (int k = 0; k < 8; ++k) {
    const auto idx = static_cast<std::size_t>(s.corner[k]);
    const double w = s.weight[k];
    grad.density[idx] += dsig * w;
    grad.rgb[3 * idx + 0] += drgb[0] * w;
    grad.rgb[3 * idx + 1] += drgb[1] * w;
    grad.rgb[3 * idx + 2] += drgb[2] * w;
    if (!grad.touched_flag[idx]) {
      grad.touched_flag[idx] = 1;
      grad.touched.push_back(s.corner[k]);
    }
  }
}

namespace {

constexpr char kRfgMagic[4] = {'R', 'F', 'G', '1'};

template <typename T>
void write_bin(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_bin(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

} // namespace

void save_rfg1(const RadianceGrid& grid, const std::filesystem::path& path) {
  grid.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_rfg1: cannot open " + path.string());
  out.write(kRfgMagic, 4);
  write_bin<std::uint32_t>(out, static_cast<std::uint32_t>(grid.nx));
  write_bin<std::uint32_t>(out, static_cast<std::uint32_t>(grid.ny));
  write_bin<std::uint32_t>(out, static_cast<std::uint32_t>(grid.nz));
  for (int a = 0; a < 3; ++a) write_bin<double>(out, grid.bound_min[a]);
  for (int a = 0; a < 3; ++a) write_bin<double>(out, grid.bound_max[a]);
  write_bin<std::uint8_t>(out, grid.clip ? 1 : 0);
  const CylinderClip c = grid.clip.value_or(CylinderClip{});
  write_bin<double>(out, c.r_max);
  write_bin<double>(out, c.z_min);
  write_bin<double>(out, c.z_max);
  out.write(reinterpret_cast<const char*>(grid.raw_density.data()),
            static_cast<std::streamsize>(grid.raw_density.size() *
                                         sizeof(float)));
  out.write(reinterpret_cast<const char*>(grid.raw_rgb.data()),
            static_cast<std::streamsize>(grid.raw_rgb.size() * sizeof(float)));
  if (!out) throw IoError("save_rfg1: write failed for " + path.string());
}

RadianceGrid load_rfg1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_rfg1: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kRfgMagic, 4) != 0)
    throw IoError("load_rfg1: bad magic in " + path.string());
  RadianceGrid grid;
  grid.nx = static_cast<int>(read_bin<std::uint32_t>(in));
  grid.ny = static_cast<int>(read_bin<std::uint32_t>(in));
  grid.nz = static_cast<int>(read_bin<std::uint32_t>(in));
  for (int a = 0; a < 3; ++a) grid.bound_min[a] = read_bin<double>(in);
  for (int a = 0; a < 3; ++a) grid.bound_max[a] = read_bin<double>(in);
  const bool has_clip = read_bin<std::uint8_t>(in) != 0;
  CylinderClip c;
  c.r_max = read_bin<double>(in);
  c.z_min = read_bin<double>(in);
  c.z_max = read_bin<double>(in);
  if (has_clip) grid.clip = c;
  if (!in) throw IoError("load_rfg1: truncated header in " + path.string());
  grid.raw_density.resize(grid.cell_count());
  grid.raw_rgb.resize(grid.cell_count() * 3);
  in.read(reinterpret_cast<char*>(grid.raw_density.data()),
          static_cast<std::streamsize>(grid.raw_density.size() *
                                       sizeof(float)));
  in.read(reinterpret_cast<char*>(grid.raw_rgb.data()),
          static_cast<std::streamsize>(grid.raw_rgb.size() * sizeof(float)));
  if (!in) throw IoError("load_rfg1: truncated data in " + path.string());
  grid.validate();
  return grid;
}

} // namespace evrf
