#include "evrf/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "evrf/errors.hpp"

namespace evrf {

Image Image::zeros(int w, int h, int c) {
  Image img;
  img.width = w;
  img.height = h;
  img.channels = c;
  img.data.assign(static_cast<std::size_t>(w) * h * c, 0.0);
  return img;
}

Image Image::constant(int w, int h, int c, double value) {
  Image img = zeros(w, h, c);
  std::fill(img.data.begin(), img.data.end(), value);
  return img;
}

void save_pfm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3)
    throw DomainError("save_pfm: image must have 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_pfm: cannot open " + path.string());
  out << (img.channels == 3 ? "PF" : "Pf") << "\n"
      << img.width << " " << img.height << "\n"
      << "-1.0\n";
  // PFM stores rows bottom-to-top.
  const std::size_t row_floats =
      static_cast<std::size_t>(img.width) * img.channels;
  std::vector<float> row(row_floats);
  for (int y = img.height - 1; y >= 0; --y) {
    const double* src = img.data.data() + static_cast<std::size_t>(y) *
                                              row_floats;
    for (std::size_t i = 0; i < row_floats; ++i)
      row[i] = static_cast<float>(src[i]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row_floats * sizeof(float)));
  }
  if (!out) throw IoError("save_pfm: write failed for " + path.string());
}

Image load_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_pfm: cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || (magic != "PF" && magic != "Pf") || w <= 0 || h <= 0)
    throw IoError("load_pfm: bad header in " + path.string());
  in.get(); // single whitespace byte after the scale line
  Image img = Image::zeros(w, h, magic == "PF" ? 3 : 1);
  const std::size_t row_floats = static_cast<std::size_t>(w) * img.channels;
  std::vector<float> row(row_floats);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row_floats * sizeof(float)));
    double* dst = img.data.data() + static_cast<std::size_t>(y) * row_floats;
    for (std::size_t i = 0; i < row_floats; ++i) {
      float f = row[i];
      if (scale > 0) { // big-endian file
        std::uint32_t v;
        std::memcpy(&v, &f, 4);
        v = __builtin_bswap32(v);
        std::memcpy(&f, &v, 4);
      }
      dst[i] = f;
    }
  }
  if (!in) throw IoError("load_pfm: truncated data in " + path.string());
  return img;
}

namespace {

std::uint8_t encode_byte(double linear, double gamma) {
  const double clipped = std::clamp(linear, 0.0, 1.0);
  const double display = std::pow(clipped, 1.0 / gamma);
  return static_cast<std::uint8_t>(std::lround(display * 255.0));
}

} // namespace

void save_ppm(const Image& img, const std::filesystem::path& path,
              double gamma) {
  if (img.channels != 1 && img.channels != 3)
    throw DomainError("save_ppm: image must have 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_ppm: cannot open " + path.string());
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> bytes(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i)
    bytes[i] = encode_byte(img.data[i], gamma);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("save_ppm: write failed for " + path.string());
}

double srgb_to_linear_value(double encoded) {
  return encoded <= 0.04045 ? encoded / 12.92
                            : std::pow((encoded + 0.055) / 1.055, 2.4);
}

Image load_ppm(const std::filesystem::path& path, bool srgb_to_linear) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_ppm: cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || (magic != "P6" && magic != "P5") || w <= 0 || h <= 0 ||
      maxval != 255)
    throw IoError("load_ppm: bad header in " + path.string());
  in.get();
  Image img = Image::zeros(w, h, magic == "P6" ? 3 : 1);
  std::vector<std::uint8_t> bytes(img.data.size());
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoError("load_ppm: truncated data in " + path.string());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = bytes[i] / 255.0;
    img.data[i] = srgb_to_linear ? srgb_to_linear_value(v) : v;
  }
  return img;
}

Image to_luminance(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3)
    throw DomainError("to_luminance: expected 1 or 3 channels");
  Image out = Image::zeros(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(x, y, 0) = 0.2126 * img.at(x, y, 0) + 0.7152 * img.at(x, y, 1) +
                        0.0722 * img.at(x, y, 2);
  return out;
}

} // namespace evrf
