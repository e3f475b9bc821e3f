#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace evrf {

/// Row-major, channel-interleaved image. Linear light unless noted.
/// Values live in double precision in memory; float codecs convert at the
/// file boundary.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  static Image zeros(int w, int h, int c);
  static Image constant(int w, int h, int c, double value);

  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height &&
           channels == other.channels;
  }
};

// Portable float map ("PF" colour / "Pf" grayscale, little-endian,
// bottom-to-top rows). Round-trips float data bit-exactly.
void save_pfm(const Image& img, const std::filesystem::path& path);
Image load_pfm(const std::filesystem::path& path);

// 8-bit binary PPM/PGM. Writing applies the 1/gamma display curve to linear
// values; loading optionally converts sRGB-encoded bytes back to linear.
void save_ppm(const Image& img, const std::filesystem::path& path,
              double gamma = 2.2);
Image load_ppm(const std::filesystem::path& path, bool srgb_to_linear);

double srgb_to_linear_value(double encoded);

/// Rec. 709 luma of a 3-channel image (identity for 1-channel input).
Image to_luminance(const Image& img);

} // namespace evrf
