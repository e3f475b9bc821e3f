#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "evrf/types.hpp"

namespace evrf {

inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double softplus_inverse(double y) {
  return y > 30 ? y : std::log(std::expm1(y));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Density support region: a vertical cylinder around the world z axis.
struct CylinderClip {
  double r_max = 0.25;
  double z_min = -0.35;
  double z_max = 0.15;

  bool contains(const Vec3& p) const {
    return p.x() * p.x() + p.y() * p.y() <= r_max * r_max &&
           p.z() >= z_min && p.z() <= z_max;
  }
};

/// Turntable prior used for all captures in this setup.
CylinderClip default_clip();

/// Field value at a point plus the local derivative stencil: the 8 cell
/// corners touched by the trilinear interpolation, their weights, and the
/// activation derivatives at the interpolated raw values.
struct FieldSample {
  double sigma = 0;
  Vec3 rgb{0.5, 0.5, 0.5};
  bool has_stencil = false;
  std::array<std::int32_t, 8> corner{};
  std::array<double, 8> weight{};
  double dsigma_draw = 0; // d sigma / d interpolated raw density
  Vec3 drgb_draw{0, 0, 0};
};

struct RadianceGrid;

/// Dense gradient accumulator matching a grid's parameter layout. Touched
/// indices are tracked so buffers can be cleared and reduced sparsely.
struct GradBuffer {
  std::vector<double> density;
  std::vector<double> rgb;
  std::vector<std::int32_t> touched; // density indices with any contribution
  std::vector<std::uint8_t> touched_flag;

  void resize_for(const RadianceGrid& grid);
  void clear();
  void scale(double factor);
  /// other += this, then this is cleared. Order of calls fixes the
  /// floating-point reduction order.
  void drain_into(GradBuffer& other);
};

/// Voxel radiance field: raw density and raw RGB per grid vertex, trilinear
/// interpolation of the raw values, softplus / sigmoid activations on top.
struct RadianceGrid {
  int nx = 0, ny = 0, nz = 0;
  Vec3 bound_min{-0.5, -0.5, -0.5};
  Vec3 bound_max{0.5, 0.5, 0.5};
  std::optional<CylinderClip> clip;
  std::vector<float> raw_density; // nx*ny*nz
  std::vector<float> raw_rgb;     // nx*ny*nz * 3, channel-interleaved

  /// Grid with raw_density = softplus^-1(sigma0) and raw_rgb = 0.
  static RadianceGrid create(int nx, int ny, int nz, const Vec3& bound_min,
                             const Vec3& bound_max, double sigma0 = 0.01);

  std::size_t cell_count() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  std::size_t param_count() const { return cell_count() * 4; }

  void validate() const;

  /// Sample the field at x. Outside the bounds or the clip cylinder the
  /// density is exactly zero; the stencil is only populated in bounds.
  void query(const Vec3& x, FieldSample& out) const;
  FieldSample query(const Vec3& x) const;

  /// Chain-rule d loss/d sigma and d loss/d rgb at x into parameter
  /// gradients. No-op outside the bounds or the clip cylinder.
  void accumulate_param_gradient(const Vec3& x, double dloss_dsigma,
                                 const Vec3& dloss_drgb,
                                 GradBuffer& grad) const;
};

// Checkpoint codec "RFG1": header (magic, u32 resolution, f64 bounds and
// clip) followed by the raw parameter arrays as little-endian f32.
// Round-trips bit-exactly.
void save_rfg1(const RadianceGrid& grid, const std::filesystem::path& path);
RadianceGrid load_rfg1(const std::filesystem::path& path);

} // namespace evrf
