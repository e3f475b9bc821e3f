#pragma once

#include <filesystem>
#include <vector>

#include "evrf/geometry.hpp"
#include "evrf/image.hpp"
#include "evrf/renderer.hpp"
#include "evrf/types.hpp"

namespace evrf {

/// Per-channel log-space gain/offset aligning predictions to ground truth:
/// f(I) = exp(a * log I + b). Absorbs the unknown event threshold, exposure
/// and white balance before metrics are computed.
struct ColourTransform {
  Vec3 a{1, 1, 1};
  Vec3 b{0, 0, 0};
  bool degenerate = false; // a zero-variance channel fell back to a = 0
};

/// Closed-form least squares of log(gt) on log(pred), jointly over all
/// pixels of all views. Values are clamped at `floor` before the log.
ColourTransform fit_colour_transform(const std::vector<Image>& preds,
                                     const std::vector<Image>& gts,
                                     double floor = 1e-4);

Image apply_colour_transform(const Image& img, const ColourTransform& t,
                             double floor = 1e-4);

/// 10 log10(max^2 / MSE) over values clipped to [0, max]. Identical images
/// report +infinity.
double psnr(const Image& pred, const Image& gt, double max_value = 1.0);

/// Single-scale SSIM on luminance: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Mean over positions where the
/// window fits entirely. Images must be at least 11x11.
double ssim(const Image& pred, const Image& gt);
double ssim_per_channel_mean(const Image& pred, const Image& gt);

struct EvalReport {
  std::vector<double> view_psnr;
  std::vector<double> view_ssim;
  double mean_psnr = 0;
  double mean_ssim = 0;
  ColourTransform transform;
};

/// Render every pose at pixel centres, fit one colour transform for the
/// whole sequence, then report per-view PSNR/SSIM of the transformed,
/// clipped, display-encoded images against ground truth.
EvalReport evaluate_sequence(const RadianceGrid& grid,
                             const CameraIntrinsics& cam,
                             const std::vector<Pose>& poses,
                             const std::vector<Image>& gt_images, double g,
                             const SamplingConfig& cfg, const Background& bg,
                             int threads = 1);

/// Same protocol for already-rendered predictions.
EvalReport evaluate_images(const std::vector<Image>& preds,
                           const std::vector<Image>& gt_images, double g);

/// CSV report (view, psnr, ssim) plus a mean summary row; the fitted
/// transform goes to a sibling text file.
void save_eval_report(const EvalReport& report,
                      const std::filesystem::path& csv_path);

} // namespace evrf
