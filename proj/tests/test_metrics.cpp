#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "evrf/errors.hpp"
#include "evrf/metrics.hpp"
#include "evrf/rng.hpp"
#include "test_util.hpp"

using namespace evrf;

namespace {

Image random_image(int w, int h, std::uint64_t seed, double lo = 0.05,
                   double hi = 0.95) {
  Image img = Image::zeros(w, h, 3);
  Rng rng(seed);
  for (double& v : img.data) v = rng.uniform(lo, hi);
  return img;
}

// Smooth random image so SSIM statistics are non-trivial.
Image smooth_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img = Image::zeros(w, h, 3);
  const double fx = rng.uniform(0.1, 0.5), fy = rng.uniform(0.1, 0.5);
  const double px = rng.uniform(0, 6), py = rng.uniform(0, 6);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = 0.5 + 0.35 * std::sin(fx * x + px + c) *
                                    std::cos(fy * y + py);
  return img;
}

// Direct per-window SSIM on luminance, kept deliberately naive.
double ssim_reference(const Image& pred, const Image& gt) {
  const Image a_img = to_luminance(pred);
  const Image b_img = to_luminance(gt);
  const int half = 5;
  std::vector<double> kernel(11);
  double ksum = 0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - half;
    kernel[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  int count = 0;
  for (int cy = half; cy < pred.height - half; ++cy)
    for (int cx = half; cx < pred.width - half; ++cx) {
      double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
          const double w = kernel[dy + half] * kernel[dx + half];
          const double va =
              std::clamp(a_img.at(cx + dx, cy + dy, 0), 0.0, 1.0);
          const double vb =
              std::clamp(b_img.at(cx + dx, cy + dy, 0), 0.0, 1.0);
          mu_a += w * va;
          mu_b += w * vb;
          aa += w * va * va;
          bb += w * vb * vb;
          ab += w * va * vb;
        }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++count;
    }
  return total / count;
}

} // namespace

TEST_CASE("identity fit recovers unit gain and zero offset exactly") {
  const std::vector<Image> imgs = {random_image(16, 16, 3),
                                   random_image(16, 16, 5)};
  const ColourTransform t = fit_colour_transform(imgs, imgs);
  for (int c = 0; c < 3; ++c) {
    CHECK(t.a[c] == 1.0);
    CHECK(t.b[c] == 0.0);
  }
  CHECK_FALSE(t.degenerate);
}

TEST_CASE("fit inverts a constructed log-linear transform analytically") {
  const double k = 0.37;
  const std::vector<Image> gts = {random_image(24, 24, 7)};
  Image pred = gts[0];
  for (double& v : pred.data) v = std::exp(2.0 * std::log(v) + k);
  const ColourTransform t = fit_colour_transform({pred}, gts);
  for (int c = 0; c < 3; ++c) {
    CHECK(t.a[c] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(t.b[c] == doctest::Approx(-k / 2).epsilon(1e-9));
  }
}

TEST_CASE("the fitted transform is a least-squares optimum") {
  const std::vector<Image> preds = {random_image(20, 20, 11)};
  const std::vector<Image> gts = {random_image(20, 20, 13)};
  const ColourTransform t = fit_colour_transform(preds, gts);

  auto residual = [&](const Vec3& a, const Vec3& b) {
    double total = 0;
    for (std::size_t i = 0; i < preds[0].data.size(); ++i) {
      const int c = static_cast<int>(i % 3);
      const double x = std::log(std::max(preds[0].data[i], 1e-4));
      const double y = std::log(std::max(gts[0].data[i], 1e-4));
      const double r = a[c] * x + b[c] - y;
      total += r * r;
    }
    return total;
  };
  const double at_fit = residual(t.a, t.b);
  // Any perturbed transform does worse.
  for (int c = 0; c < 3; ++c)
    for (const double d : {-1e-3, 1e-3}) {
      Vec3 a = t.a, b = t.b;
      a[c] += d;
      CHECK(residual(a, b) >= at_fit);
      a = t.a;
      b[c] += d;
      CHECK(residual(a, b) >= at_fit);
    }
}

TEST_CASE("a zero-variance channel falls back to the mean") {
  Image pred = random_image(8, 8, 17);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) pred.at(x, y, 1) = 0.25;
  const std::vector<Image> gts = {random_image(8, 8, 19)};
  const ColourTransform t = fit_colour_transform({pred}, gts);
  CHECK(t.degenerate);
  CHECK(t.a[1] == 0.0);
  double mean = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) mean += std::log(gts[0].at(x, y, 1));
  mean /= 64;
  CHECK(t.b[1] == doctest::Approx(mean).epsilon(1e-9));
}

TEST_CASE("transform-fit idempotence") {
  const std::vector<Image> preds = {random_image(16, 16, 23)};
  const std::vector<Image> gts = {random_image(16, 16, 29)};
  const ColourTransform t = fit_colour_transform(preds, gts);
  const Image aligned = apply_colour_transform(preds[0], t);
  const ColourTransform again = fit_colour_transform({aligned}, gts);
  for (int c = 0; c < 3; ++c) {
    CHECK(again.a[c] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(again.b[c]) < 1e-9);
  }
}

TEST_CASE("psnr of identical images is the infinity sentinel") {
  const Image img = random_image(12, 12, 31);
  CHECK(psnr(img, img) == std::numeric_limits<double>::infinity());
}

TEST_CASE("psnr of a uniform 0.1 error is 20 dB") {
  Image a = Image::constant(16, 16, 3, 0.4);
  Image b = Image::constant(16, 16, 3, 0.5);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("psnr of a binary checkerboard against flat gray is 6.02 dB") {
  Image board = Image::zeros(16, 16, 3);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) board.at(x, y, c) = (x + y) % 2;
  const Image gray = Image::constant(16, 16, 3, 0.5);
  // MSE = 0.25 -> 10 log10(1 / 0.25).
  CHECK(psnr(board, gray) ==
        doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-9));
}

TEST_CASE("psnr demands matching shapes") {
  CHECK_THROWS_AS(psnr(Image::zeros(4, 4, 3), Image::zeros(4, 5, 3)),
                  DomainError);
}

TEST_CASE("ssim of identical images is exactly one") {
  const Image img = smooth_image(24, 24, 37);
  CHECK(ssim(img, img) == 1.0);
}

TEST_CASE("ssim of an inverted binary image is negative") {
  Image board = Image::zeros(16, 16, 3);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) board.at(x, y, c) = (x + y) % 2;
  Image inverted = board;
  for (double& v : inverted.data) v = 1.0 - v;
  CHECK(ssim(board, inverted) < 0.0);
}

TEST_CASE("ssim agrees with an independent direct-summation oracle") {
  for (std::uint64_t seed : {41, 43, 47}) {
    const Image a = smooth_image(32, 28, seed);
    const Image b = smooth_image(32, 28, seed + 100);
    CHECK(std::abs(ssim(a, b) - ssim_reference(a, b)) < 1e-6);
    CHECK(ssim(a, b) <= 1.0 + 1e-12);
    CHECK(ssim(a, b) >= -1.0 - 1e-12);
  }
}

TEST_CASE("ssim rejects images smaller than the window") {
  const Image tiny = Image::constant(8, 8, 3, 0.5);
  CHECK_THROWS_AS(ssim(tiny, tiny), DomainError);
}

TEST_CASE("evaluating predictions equal to ground truth is perfect") {
  std::vector<Image> views;
  for (int k = 0; k < 3; ++k) views.push_back(smooth_image(24, 24, 50 + k));
  const EvalReport report = evaluate_images(views, views, 2.2);
  CHECK(report.mean_psnr == std::numeric_limits<double>::infinity());
  CHECK(report.mean_ssim == 1.0);
  for (double p : report.view_psnr)
    CHECK(p == std::numeric_limits<double>::infinity());
}

TEST_CASE("global colour shifts evaluate like identical images") {
  std::vector<Image> gts, preds;
  for (int k = 0; k < 2; ++k) {
    gts.push_back(smooth_image(24, 24, 60 + k));
    Image shifted = gts.back();
    // Exact per-channel exposure shifts (powers of two).
    const double gains[3] = {2.0, 0.5, 4.0};
    for (std::size_t i = 0; i < shifted.data.size(); ++i)
      shifted.data[i] *= gains[i % 3];
    preds.push_back(shifted);
  }
  const EvalReport report = evaluate_images(preds, gts, 2.2);
  CHECK(report.mean_psnr > 200.0);
  CHECK(report.mean_ssim > 1.0 - 1e-9);
}

TEST_CASE("evaluation is invariant to log-linear distortions within 1e-9") {
  std::vector<Image> gts, preds;
  for (int k = 0; k < 2; ++k) {
    gts.push_back(smooth_image(20, 20, 70 + k));
    preds.push_back(smooth_image(20, 20, 80 + k));
  }
  const EvalReport base = evaluate_images(preds, gts, 2.2);

  Rng rng(91);
  for (int trial = 0; trial < 4; ++trial) {
    Vec3 a, b;
    for (int c = 0; c < 3; ++c) {
      a[c] = rng.uniform(0.8, 1.25);
      b[c] = rng.uniform(-0.2, 0.2);
    }
    std::vector<Image> distorted = preds;
    for (Image& img : distorted)
      for (std::size_t i = 0; i < img.data.size(); ++i) {
        const int c = static_cast<int>(i % 3);
        img.data[i] = std::exp(a[c] * std::log(img.data[i]) + b[c]);
      }
    const EvalReport report = evaluate_images(distorted, gts, 2.2);
    for (std::size_t k = 0; k < base.view_psnr.size(); ++k) {
      CHECK(std::abs(report.view_psnr[k] - base.view_psnr[k]) < 1e-9);
      CHECK(std::abs(report.view_ssim[k] - base.view_ssim[k]) < 1e-9);
    }
  }
}

TEST_CASE("psnr and ssim respect their bounds on random inputs") {
  Rng rng(97);
  for (int k = 0; k < 5; ++k) {
    const Image a = random_image(16, 16, rng.next());
    const Image b = random_image(16, 16, rng.next());
    CHECK(psnr(a, b) >= 0.0);
    const double s = ssim(a, b);
    CHECK(s >= -1.0 - 1e-12);
    CHECK(s <= 1.0 + 1e-12);
  }
}

TEST_CASE("eval report CSV has one row per view plus a summary") {
  const testutil::TempDir dir("evalcsv");
  std::vector<Image> views = {smooth_image(16, 16, 101),
                              smooth_image(16, 16, 102)};
  const EvalReport report = evaluate_images(views, views, 2.2);
  const auto path = dir.path / "report.csv";
  save_eval_report(report, path);
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1 + 2 + 1); // header, two views, mean
}
