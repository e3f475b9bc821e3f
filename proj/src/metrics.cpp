#include "evrf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evrf/errors.hpp"

namespace evrf {

ColourTransform fit_colour_transform(const std::vector<Image>& preds,
                                     const std::vector<Image>& gts,
                                     double floor) {
  if (preds.size() != gts.size() || preds.empty())
    throw DomainError("fit_colour_transform: need equal, non-empty lists");
  for (std::size_t k = 0; k < preds.size(); ++k)
    if (!preds[k].same_shape(gts[k]) || preds[k].channels != 3)
      throw DomainError("fit_colour_transform: shape mismatch");

  // Per channel: a = cov(x, y) / var(x), b = mean(y) - a mean(x) with
  // x = log pred, y = log gt.
  double n = 0;
  Vec3 sum_x = Vec3::Zero(), sum_y = Vec3::Zero();
  Vec3 sum_xx = Vec3::Zero(), sum_xy = Vec3::Zero();
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const Image& p = preds[k];
    const Image& gt = gts[k];
    const std::size_t pixels =
        static_cast<std::size_t>(p.width) * p.height;
    for (std::size_t i = 0; i < pixels; ++i) {
      for (int c = 0; c < 3; ++c) {
        const double x = std::log(
            std::max(static_cast<double>(p.data[3 * i + c]), floor));
        const double y = std::log(
            std::max(static_cast<double>(gt.data[3 * i + c]), floor));
        sum_x[c] += x;
        sum_y[c] += y;
        sum_xx[c] += x * x;
        sum_xy[c] += x * y;
      }
    }
    n += static_cast<double>(pixels);
  }

  ColourTransform t;
  for (int c = 0; c < 3; ++c) {
    const double var = sum_xx[c] - sum_x[c] * sum_x[c] / n;
    const double cov = sum_xy[c] - sum_x[c] * sum_y[c] / n;
    if (var <= 1e-12 * std::max(1.0, std::abs(sum_xx[c]))) {
      t.a[c] = 0;
      t.b[c] = sum_y[c] / n;
      t.degenerate = true;
    } else {
      t.a[c] = cov / var;
      t.b[c] = (sum_y[c] - t.a[c] * sum_x[c]) / n;
    }
  }
  return t;
}

Image apply_colour_transform(const Image& img, const ColourTransform& t,
                             double floor) {
  if (img.channels != 3)
    throw DomainError("apply_colour_transform: expected 3 channels");
  Image out = img;
  const std::size_t pixels = static_cast<std::size_t>(img.width) * img.height;
  // exp(a log x + b) written as x^a e^b so the identity transform is exact.
  const Vec3 gain(std::exp(t.b[0]), std::exp(t.b[1]), std::exp(t.b[2]));
  for (std::size_t i = 0; i < pixels; ++i)
    for (int c = 0; c < 3; ++c) {
      const double x = std::max(img.data[3 * i + c], floor);
      out.data[3 * i + c] = std::pow(x, t.a[c]) * gain[c];
    }
  return out;
}

double psnr(const Image& pred, const Image& gt, double max_value) {
  if (!pred.same_shape(gt)) throw DomainError("psnr: shape mismatch");
  double mse = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double a =
        std::clamp(static_cast<double>(pred.data[i]), 0.0, max_value);
    const double b =
        std::clamp(static_cast<double>(gt.data[i]), 0.0, max_value);
    mse += (a - b) * (a - b);
  }
  mse /= static_cast<double>(pred.data.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse);
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kSsimWindow);
  const int half = kSsimWindow / 2;
  double sum = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable Gaussian filter; output is the valid region only.
std::vector<double> blur_valid(const std::vector<double>& img, int w, int h,
                               int& out_w, int& out_h) {
  const std::vector<double> kernel = gaussian_kernel();
  const int half = kSsimWindow / 2;
  out_w = w - 2 * half;
  out_h = h - 2 * half;
  std::vector<double> rows(static_cast<std::size_t>(out_w) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < out_w; ++x) {
      double acc = 0;
      for (int k = 0; k < kSsimWindow; ++k)
        acc += kernel[k] * img[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h, 0.0);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      double acc = 0;
      for (int k = 0; k < kSsimWindow; ++k)
        acc += kernel[k] * rows[static_cast<std::size_t>(y + k) * out_w + x];
      out[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b,
                  int w, int h) {
  std::vector<double> aa(a.size()), bb(b.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  int vw = 0, vh = 0;
  const auto mu_a = blur_valid(a, w, h, vw, vh);
  const auto mu_b = blur_valid(b, w, h, vw, vh);
  const auto m_aa = blur_valid(aa, w, h, vw, vh);
  const auto m_bb = blur_valid(bb, w, h, vw, vh);
  const auto m_ab = blur_valid(ab, w, h, vw, vh);
  const double c1 = kSsimK1 * kSsimK1;
  const double c2 = kSsimK2 * kSsimK2;
  double total = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = m_aa[i] - mu_a[i] * mu_a[i];
    const double vb = m_bb[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_a[i] * mu_b[i];
    total += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

std::vector<double> clipped_plane(const Image& img, int channel) {
  std::vector<double> out(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out[static_cast<std::size_t>(y) * img.width + x] =
          std::clamp(static_cast<double>(img.at(x, y, channel)), 0.0, 1.0);
  return out;
}

} // namespace

double ssim(const Image& pred, const Image& gt) {
  if (!pred.same_shape(gt)) throw DomainError("ssim: shape mismatch");
  if (pred.width < kSsimWindow || pred.height < kSsimWindow)
    throw DomainError("ssim: images must be at least 11x11");
  Image pl = to_luminance(pred);
  Image gl = to_luminance(gt);
  return ssim_plane(clipped_plane(pl, 0), clipped_plane(gl, 0), pred.width,
                    pred.height);
}

double ssim_per_channel_mean(const Image& pred, const Image& gt) {
  if (!pred.same_shape(gt)) throw DomainError("ssim: shape mismatch");
  if (pred.width < kSsimWindow || pred.height < kSsimWindow)
    throw DomainError("ssim: images must be at least 11x11");
  double total = 0;
  for (int c = 0; c < pred.channels; ++c)
    total += ssim_plane(clipped_plane(pred, c), clipped_plane(gt, c),
                        pred.width, pred.height);
  return total / pred.channels;
}

namespace {

Image display_encode(const Image& img, double g) {
  Image out = img;
  for (double& v : out.data) v = std::pow(std::clamp(v, 0.0, 1.0), 1.0 / g);
  return out;
}

} // namespace

EvalReport evaluate_images(const std::vector<Image>& preds,
                           const std::vector<Image>& gt_images, double g) {
  if (preds.size() != gt_images.size() || preds.empty())
    throw DomainError("evaluate: prediction/ground-truth count mismatch");
  EvalReport report;
  report.transform = fit_colour_transform(preds, gt_images);
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const Image aligned = apply_colour_transform(preds[k], report.transform);
    const Image p = display_encode(aligned, g);
    const Image t = display_encode(gt_images[k], g);
    report.view_psnr.push_back(psnr(p, t));
    report.view_ssim.push_back(ssim(p, t));
  }
  double sp = 0, ss = 0;
  for (std::size_t k = 0; k < report.view_psnr.size(); ++k) {
    sp += report.view_psnr[k];
    ss += report.view_ssim[k];
  }
  report.mean_psnr = sp / static_cast<double>(report.view_psnr.size());
  report.mean_ssim = ss / static_cast<double>(report.view_ssim.size());
  return report;
}

EvalReport evaluate_sequence(const RadianceGrid& grid,
                             const CameraIntrinsics& cam,
                             const std::vector<Pose>& poses,
                             const std::vector<Image>& gt_images, double g,
                             const SamplingConfig& cfg, const Background& bg,
                             int threads) {
  if (poses.size() != gt_images.size())
    throw DomainError("evaluate_sequence: pose/image count mismatch");
  std::vector<Image> preds(poses.size());
  for (std::size_t k = 0; k < poses.size(); ++k)
    preds[k] = render_view(grid, cam, poses[k], cfg, bg, threads).rgb;
  return evaluate_images(preds, gt_images, g);
}

void save_eval_report(const EvalReport& report,
                      const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw IoError("save_eval_report: cannot open " +
                          csv_path.string());
  out << "view,psnr,ssim\n";
  out.precision(10);
  for (std::size_t k = 0; k < report.view_psnr.size(); ++k)
    out << k << ',' << report.view_psnr[k] << ',' << report.view_ssim[k]
        << '\n';
  out << "mean," << report.mean_psnr << ',' << report.mean_ssim << '\n';
  std::filesystem::path txt = csv_path;
  txt.replace_extension(".transform.txt");
  std::ofstream tf(txt);
  tf.precision(17);
  tf << "a " << report.transform.a.transpose() << "\n"
     << "b " << report.transform.b.transpose() << "\n"
     << "degenerate " << (report.transform.degenerate ? 1 : 0) << "\n";
}

} // namespace evrf
