#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "evrf/errors.hpp"
#include "evrf/field.hpp"
#include "evrf/rng.hpp"
#include "test_util.hpp"

using namespace evrf;
using testutil::random_grid;

TEST_CASE("default clip matches the turntable constants") {
  const CylinderClip clip = default_clip();
  CHECK(clip.r_max == 0.25);
  CHECK(clip.z_min == -0.35);
  CHECK(clip.z_max == 0.15);
  CHECK(clip.contains(Vec3::Zero()));
  CHECK_FALSE(clip.contains(Vec3(0.3, 0, 0)));
  CHECK_FALSE(clip.contains(Vec3(0, 0, 0.2)));
  CHECK_FALSE(clip.contains(Vec3(0, 0, -0.4)));
}

TEST_CASE("density is exactly zero outside the clip cylinder") {
  RadianceGrid grid = random_grid(8, 1, 5.0); // strongly positive densities
  for (float& v : grid.raw_density) v = 50.0f;
  grid.clip = default_clip();
  CHECK(grid.query(Vec3(0.3, 0.3, 0.0)).sigma == 0.0);
  CHECK(grid.query(Vec3(0.0, 0.0, 0.16)).sigma == 0.0);
  CHECK(grid.query(Vec3(0.0, 0.0, -0.36)).sigma == 0.0);
  CHECK(grid.query(Vec3(0.1, 0.1, 0.0)).sigma > 0.0);
}

TEST_CASE("density is exactly zero outside the bounds") {
  RadianceGrid grid = random_grid(8, 2);
  for (float& v : grid.raw_density) v = 50.0f;
  const FieldSample s = grid.query(Vec3(0.51, 0.0, 0.0));
  CHECK(s.sigma == 0.0);
  CHECK_FALSE(s.has_stencil);
}

TEST_CASE("constant parameters interpolate to a constant field") {
  RadianceGrid grid = RadianceGrid::create(6, 6, 6, Vec3(-0.5, -0.5, -0.5),
                                           Vec3(0.5, 0.5, 0.5));
  std::fill(grid.raw_density.begin(), grid.raw_density.end(), 0.7f);
  std::fill(grid.raw_rgb.begin(), grid.raw_rgb.end(), -0.3f);
  Rng rng(5);
  const FieldSample ref = grid.query(Vec3::Zero());
  for (int k = 0; k < 50; ++k) {
    const Vec3 x(rng.uniform(-0.49, 0.49), rng.uniform(-0.49, 0.49),
                 rng.uniform(-0.49, 0.49));
    const FieldSample s = grid.query(x);
    CHECK(s.sigma == doctest::Approx(ref.sigma).epsilon(1e-12));
    for (int c = 0; c < 3; ++c)
      CHECK(s.rgb[c] == doctest::Approx(ref.rgb[c]).epsilon(1e-12));
  }
}

TEST_CASE("query at a voxel corner returns the activated parameter") {
  RadianceGrid grid = random_grid(5, 3);
  const int ix = 2, iy = 1, iz = 3;
  const Vec3 cell(grid.bound_min[0] + (grid.bound_max[0] - grid.bound_min[0]) *
                                          ix / (grid.nx - 1),
                  grid.bound_min[1] + (grid.bound_max[1] - grid.bound_min[1]) *
                                          iy / (grid.ny - 1),
                  grid.bound_min[2] + (grid.bound_max[2] - grid.bound_min[2]) *
                                          iz / (grid.nz - 1));
  const std::size_t idx =
      (static_cast<std::size_t>(iz) * grid.ny + iy) * grid.nx + ix;
  const FieldSample s = grid.query(cell);
  CHECK(s.sigma ==
        doctest::Approx(softplus(grid.raw_density[idx])).epsilon(1e-9));
  for (int c = 0; c < 3; ++c)
    CHECK(s.rgb[c] ==
          doctest::Approx(sigmoid(grid.raw_rgb[3 * idx + c])).epsilon(1e-9));
}

TEST_CASE("parameter gradients match central finite differences") {
  RadianceGrid grid = random_grid(8, 7);
  Rng rng(13);
  const double h = 1e-4;
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 x(rng.uniform(-0.49, 0.49), rng.uniform(-0.49, 0.49),
                 rng.uniform(-0.49, 0.49));
    const double dsig = rng.uniform(-1.0, 1.0);
    const Vec3 drgb(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                    rng.uniform(-1.0, 1.0));
    GradBuffer grad;
    grad.resize_for(grid);
    grid.accumulate_param_gradient(x, dsig, drgb, grad);
    REQUIRE(!grad.touched.empty());

    // Oracle: f(params) = dsig * sigma(x) + drgb . rgb(x), differentiated
    // by bumping each touched raw parameter.
    auto f = [&]() {
      const FieldSample s = grid.query(x);
      return dsig * s.sigma + drgb.dot(s.rgb);
    };
    for (std::int32_t cell : grad.touched) {
      const auto idx = static_cast<std::size_t>(cell);
      {
        const float saved = grid.raw_density[idx];
        const float up = static_cast<float>(saved + h);
        const float down = static_cast<float>(saved - h);
        grid.raw_density[idx] = up;
        const double hi = f();
        grid.raw_density[idx] = down;
        const double lo = f();
        grid.raw_density[idx] = saved;
        // Divide by the realized float step, not the nominal one.
        const double fd = (hi - lo) / (static_cast<double>(up) - down);
        const double scale = std::max({std::abs(fd),
                                       std::abs(grad.density[idx]), 1e-8});
        CHECK(std::abs(grad.density[idx] - fd) / scale < 1e-5);
      }
      for (int c = 0; c < 3; ++c) {
        const float saved = grid.raw_rgb[3 * idx + c];
        const float up = static_cast<float>(saved + h);
        const float down = static_cast<float>(saved - h);
        grid.raw_rgb[3 * idx + c] = up;
        const double hi = f();
        grid.raw_rgb[3 * idx + c] = down;
        const double lo = f();
        grid.raw_rgb[3 * idx + c] = saved;
        const double fd = (hi - lo) / (static_cast<double>(up) - down);
        const double scale = std::max(
            {std::abs(fd), std::abs(grad.rgb[3 * idx + c]), 1e-8});
        CHECK(std::abs(grad.rgb[3 * idx + c] - fd) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("gradient accumulation is a no-op outside the clip") {
  RadianceGrid grid = random_grid(8, 19);
  grid.clip = default_clip();
  GradBuffer grad;
  grad.resize_for(grid);
  grid.accumulate_param_gradient(Vec3(0.4, 0.0, 0.0), 1.0, Vec3(1, 1, 1),
                                 grad);
  CHECK(grad.touched.empty());
  grid.accumulate_param_gradient(Vec3(0.1, 0.0, 0.0), 0.0, Vec3::Zero(),
                                 grad);
  for (std::int32_t i : grad.touched) {
    CHECK(grad.density[i] == 0.0);
    CHECK(grad.rgb[3 * static_cast<std::size_t>(i)] == 0.0);
  }
}

TEST_CASE("query is Lipschitz within one voxel cell") {
  const RadianceGrid grid = random_grid(6, 23, 3.0);
  Rng rng(29);
  const double cell = 1.0 / (grid.nx - 1);
  for (int trial = 0; trial < 100; ++trial) {
    // Two nearby points in the interior of one cell.
    const Vec3 base(rng.uniform(-0.45, 0.40), rng.uniform(-0.45, 0.40),
                    rng.uniform(-0.45, 0.40));
    Vec3 eps;
    for (int a = 0; a < 3; ++a) eps[a] = rng.uniform(0.0, 0.2 * cell);
    const FieldSample s0 = grid.query(base);
    const FieldSample s1 = grid.query(base + eps);
    // softplus is 1-Lipschitz; the raw interpolant slope per axis is
    // bounded by the largest corner spread over the cell size.
    float lo = grid.raw_density[0], hi = grid.raw_density[0];
    for (float v : grid.raw_density) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double lip = 3.0 * (hi - lo) / cell;
    CHECK(std::abs(s1.sigma - s0.sigma) <= lip * eps.norm() + 1e-12);
  }
}

TEST_CASE("no parameter choice produces density outside the support") {
  RadianceGrid grid = random_grid(8, 31, 30.0);
  grid.clip = default_clip();
  Rng rng(37);
  for (int k = 0; k < 500; ++k) {
    Vec3 x(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
           rng.uniform(-0.6, 0.6));
    if (grid.clip->contains(x) && x.cwiseAbs().maxCoeff() <= 0.5) continue;
    CHECK(grid.query(x).sigma == 0.0);
  }
}

TEST_CASE("RFG1 checkpoints round-trip bit-exactly") {
  const testutil::TempDir dir("rfg1");
  RadianceGrid grid = random_grid(9, 41);
  grid.clip = CylinderClip{0.21, -0.12, 0.33};
  grid.bound_min = Vec3(-0.4, -0.6, -0.5);
  grid.bound_max = Vec3(0.6, 0.4, 0.5);
  const auto path = dir.path / "grid.rfg1";
  save_rfg1(grid, path);
  const RadianceGrid back = load_rfg1(path);
  CHECK(back.nx == grid.nx);
  CHECK(back.bound_min == grid.bound_min);
  CHECK(back.bound_max == grid.bound_max);
  REQUIRE(back.clip.has_value());
  CHECK(back.clip->r_max == grid.clip->r_max);
  CHECK(back.raw_density == grid.raw_density);
  CHECK(back.raw_rgb == grid.raw_rgb);

  const auto path2 = dir.path / "grid2.rfg1";
  save_rfg1(back, path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
  CHECK(bytes_a == bytes_b);
}

TEST_CASE("grid validation rejects degenerate setups") {
  CHECK_THROWS_AS(RadianceGrid::create(1, 4, 4, Vec3(-1, -1, -1),
                                       Vec3(1, 1, 1)),
                  DomainError);
  CHECK_THROWS_AS(RadianceGrid::create(4, 4, 4, Vec3(1, -1, -1),
                                       Vec3(1, 1, 1)),
                  DomainError);
}
