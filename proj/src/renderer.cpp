#include "evrf/renderer.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evrf/errors.hpp"
#include "evrf/rng.hpp"

namespace evrf {

void SamplingConfig::validate() const {
  if (n_samples < 2) throw DomainError("sampling: need at least 2 samples");
  if (importance_resample < 0)
    throw DomainError("sampling: importance_resample must be >= 0");
}

void RenderResult::reset() {
  rgb.setZero();
  depth = 0;
  opacity = 0;
  t_final = 1;
  q.clear();
  kappa.clear();
  T.clear();
  w.clear();
  sigma.clear();
  c.clear();
}

namespace {

constexpr double kDepthEps = 1e-8;

// One marching pass over fixed sample depths. Weights are computed as
// w_i = T_i - T_{i+1} so that sum(w) + T_final telescopes to exactly 1.
void march(const RadianceGrid& grid, const Background& bg,
           RenderResult& out) {
  const std::size_t n = out.q.size();
  out.kappa.resize(n);
  out.T.resize(n);
  out.w.resize(n);
  out.sigma.resize(n);
  out.c.resize(n);

  double T = 1.0;
  double sum_w = 0.0, sum_wq = 0.0;
  Vec3 rgb = Vec3::Zero();
  FieldSample sample;
  for (std::size_t i = 0; i < n; ++i) {
    const double kappa =
        (i + 1 < n ? out.q[i + 1] : out.ray.t_far) - out.q[i];
    grid.query(out.ray.point_at(out.q[i]), sample);
    const double e = std::exp(-sample.sigma * kappa);
    const double T_next = T * e;
    const double w = T - T_next;
    out.kappa[i] = kappa;
    out.T[i] = T;
    out.w[i] = w;
    out.sigma[i] = sample.sigma;
    out.c[i] = sample.rgb;
    rgb += w * sample.rgb;
    sum_w += w;
    sum_wq += w * out.q[i];
    T = T_next;
  }
  out.t_final = T;
  out.rgb = rgb + T * bg.colour;
  out.opacity = 1.0 - T;
  out.depth = sum_wq / std::max(sum_w, kDepthEps);
}

void stratified_depths(const Ray& ray, int n, bool jittered, Rng& rng,
                       std::vector<double>& q) {
  q.resize(n);
  const double step = (ray.t_far - ray.t_near) / n;
  // Deterministic mode samples bin left edges so the kappa chain covers
  // [t_near, t_far] without a leading gap and homogeneous media integrate
  // exactly.
  for (int i = 0; i < n; ++i) {
    const double u = jittered ? rng.uniform() : 0.0;
    q[i] = ray.t_near + (i + u) * step;
  }
}

// Draw `count` depths from the piecewise-constant pdf proportional to the
// first pass's weights over its sample bins.
void importance_depths(const RenderResult& first, int count, Rng& rng,
                       std::vector<double>& extra) {
  extra.clear();
  const std::size_t n = first.w.size();
  double total = 0;
  for (double w : first.w) total += w;
  if (total <= 0) return; // nothing visible yet, keep the stratified set
  std::vector<double> cdf(n);
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += first.w[i] / total;
    cdf[i] = acc;
  }
  cdf[n - 1] = 1.0;
  extra.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double u = rng.uniform();
    const std::size_t bin =
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    const double lo = first.q[bin];
    const double hi = bin + 1 < n ? first.q[bin + 1] : first.ray.t_far;
    extra.push_back(lo + rng.uniform() * (hi - lo));
  }
}

} // namespace

void render_ray(const RadianceGrid& grid, const Ray& ray,
                const SamplingConfig& cfg, const Background& bg,
                std::uint64_t seed, RenderResult& out) {
  cfg.validate();
  out.reset();
  out.ray = ray;
  out.background = bg.colour;
  if (ray.empty()) {
    out.rgb = bg.colour;
    return;
  }
  Rng rng(seed);
  stratified_depths(ray, cfg.n_samples, cfg.stratified, rng, out.q);
  march(grid, bg, out);
  if (cfg.importance_resample > 0) {
    std::vector<double> extra;
    importance_depths(out, cfg.importance_resample, rng, extra);
    if (!extra.empty()) {
      out.q.insert(out.q.end(), extra.begin(), extra.end());
      std::sort(out.q.begin(), out.q.end());
      march(grid, bg, out);
    }
  }
}

RenderResult render_ray(const RadianceGrid& grid, const Ray& ray,
                        const SamplingConfig& cfg, const Background& bg,
                        std::uint64_t seed) {
  RenderResult out;
  render_ray(grid, ray, cfg, bg, seed, out);
  return out;
}

void render_ray_adjoint(const RenderResult& result, const Vec3& dloss_drgb,
                        const RadianceGrid& grid, GradBuffer& grad) {
  const std::size_t n = result.q.size();
  if (n == 0) return; // background-only ray touches no parameter
  // Reverse sweep with a running suffix of sum_{j>i} w_j c_j. For sample i,
  //   dC/d(sigma_i kappa_i) = T_{i+1} c_i - suffix_i - T_final * background.
  Vec3 suffix = Vec3::Zero();
  for (std::size_t ii = n; ii-- > 0;) {
    const double T_next = ii + 1 < n ? result.T[ii + 1] : result.t_final;
    const Vec3 ddelta_vec =
        T_next * result.c[ii] - suffix - result.t_final * result.background;
    const double ddelta = dloss_drgb.dot(ddelta_vec);
    const double dsigma = ddelta * result.kappa[ii];
    const Vec3 dc = result.w[ii] * dloss_drgb;
    grid.accumulate_param_gradient(result.ray.point_at(result.q[ii]), dsigma,
                                   dc, grad);
    suffix += result.w[ii] * result.c[ii];
  }
}

namespace {

void render_rows(const RadianceGrid& grid, const CameraIntrinsics& cam,
                 const Pose& pose, const SamplingConfig& cfg,
                 const Background& bg, std::uint64_t seed, int y_begin,
                 int y_end, ViewImages& out) {
  RenderResult result;
  for (int y = y_begin; y < y_end; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const std::uint64_t pixel =
          static_cast<std::uint64_t>(y) * cam.width + x;
      const Ray ray = pixel_ray(cam, pose, x, y, 0.5, 0.5);
      render_ray(grid, ray, cfg, bg,
                 derive_seed(seed, SeedStream::EvalRender, pixel), result);
      for (int c = 0; c < 3; ++c) out.rgb.at(x, y, c) = result.rgb[c];
      out.depth.at(x, y, 0) = result.opacity < 0.5 ? 0.0 : result.depth;
    }
  }
}

} // namespace

ViewImages render_view(const RadianceGrid& grid, const CameraIntrinsics& cam,
                       const Pose& pose, const SamplingConfig& cfg,
                       const Background& bg, int threads, std::uint64_t seed) {
  cam.validate();
  cfg.validate();
  ViewImages out;
  out.rgb = Image::zeros(cam.width, cam.height, 3);
  out.depth = Image::zeros(cam.width, cam.height, 1);
  if (threads <= 1) {
    render_rows(grid, cam, pose, cfg, bg, seed, 0, cam.height, out);
    return out;
  }
#ifdef _OPENMP
#pragma omp parallel num_threads(threads)
  {
    RenderResult result;
#pragma omp for schedule(static)
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const std::uint64_t pixel =
            static_cast<std::uint64_t>(y) * cam.width + x;
        const Ray ray = pixel_ray(cam, pose, x, y, 0.5, 0.5);
        render_ray(grid, ray, cfg, bg,
                   derive_seed(seed, SeedStream::EvalRender, pixel), result);
        for (int c = 0; c < 3; ++c) out.rgb.at(x, y, c) = result.rgb[c];
        out.depth.at(x, y, 0) = result.opacity < 0.5 ? 0.0 : result.depth;
      }
    }
  }
#else
  render_rows(grid, cam, pose, cfg, bg, seed, 0, cam.height, out);
#endif
  return out;
}

ViewImages render_view_serial(const RadianceGrid& grid,
                              const CameraIntrinsics& cam, const Pose& pose,
                              const SamplingConfig& cfg, const Background& bg,
                              std::uint64_t seed) {
  return render_view(grid, cam, pose, cfg, bg, 1, seed);
}

} // namespace evrf
