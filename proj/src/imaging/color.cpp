#include <algorithm>
#include <array>
#include <cmath>

#include "mattevit/errors.hpp"
#include "mattevit/image.hpp"
#include "mattevit/ops.hpp"

namespace mattevit {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// Linear sRGB to XYZ, D65 white.
constexpr Mat3 kRgbToXyz = {{{0.4124564, 0.3575761, 0.1804375},
                             {0.2126729, 0.7151522, 0.0721750},
                             {0.0193339, 0.1191920, 0.9503041}}};
constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;
constexpr double kDelta = 6.0 / 29.0;

Mat3 invert(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 r{};
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

const Mat3& xyz_to_rgb_matrix() {
  static const Mat3 inv = invert(kRgbToXyz);
  return inv;
}

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double t) {
  return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

}  // namespace

Image rgb_to_lab(const Image& rgb) {
  if (rgb.space != ColorSpace::kSRGB) throw ShapeError("rgb_to_lab expects an sRGB image");
  const std::size_t plane = rgb.height() * rgb.width();
  auto px = rgb.pixels.data();
  std::vector<double> out(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    double lin[3];
    for (std::size_t c = 0; c < 3; ++c) lin[c] = srgb_to_linear(std::clamp(px[c * plane + i], 0.0, 1.0));
    double xyz[3];
    for (std::size_t r = 0; r < 3; ++r) {
      xyz[r] = kRgbToXyz[r][0] * lin[0] + kRgbToXyz[r][1] * lin[1] + kRgbToXyz[r][2] * lin[2];
    }
    const double fx = lab_f(xyz[0] / kWhiteX);
    const double fy = lab_f(xyz[1] / kWhiteY);
    const double fz = lab_f(xyz[2] / kWhiteZ);
    out[i] = std::clamp(116.0 * fy - 16.0, 0.0, 100.0);
    out[plane + i] = std::clamp(500.0 * (fx - fy), -128.0, 127.0);
    out[2 * plane + i] = std::clamp(200.0 * (fy - fz), -128.0, 127.0);
  }
  return Image(Tensor(rgb.pixels.shape(), std::move(out)), ColorSpace::kLAB);
}

Image lab_to_rgb(const Image& lab) {
  if (lab.space != ColorSpace::kLAB) throw ShapeError("lab_to_rgb expects a LAB image");
  const std::size_t plane = lab.height() * lab.width();
  auto px = lab.pixels.data();
  const Mat3& m = xyz_to_rgb_matrix();
  std::vector<double> out(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    const double fy = (px[i] + 16.0) / 116.0;
    const double fx = fy + px[plane + i] / 500.0;
    const double fz = fy - px[2 * plane + i] / 200.0;
    const double xyz[3] = {kWhiteX * lab_f_inv(fx), kWhiteY * lab_f_inv(fy), kWhiteZ * lab_f_inv(fz)};
    for (std::size_t c = 0; c < 3; ++c) {
      const double lin = m[c][0] * xyz[0] + m[c][1] * xyz[1] + m[c][2] * xyz[2];
      out[c * plane + i] = std::clamp(linear_to_srgb(std::max(lin, 0.0)), 0.0, 1.0);
    }
  }
  return Image(Tensor(lab.pixels.shape(), std::move(out)), ColorSpace::kSRGB);
}

Image to_gray(const Image& image) {
  if (image.space == ColorSpace::kGray) return image;
  if (image.space != ColorSpace::kSRGB) throw ShapeError("to_gray expects an sRGB or gray image");
  const std::size_t plane = image.height() * image.width();
  auto px = image.pixels.data();
  std::vector<double> out(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    out[i] = 0.299 * px[i] + 0.587 * px[plane + i] + 0.114 * px[2 * plane + i];
  }
  return Image(Tensor({1, image.height(), image.width()}, std::move(out)), ColorSpace::kGray);
}

Image to_rgb(const Image& image) {
  if (image.space == ColorSpace::kSRGB) return image;
  if (image.space != ColorSpace::kGray) throw ShapeError("to_rgb expects a gray or sRGB image");
  return Image(concat({image.pixels, image.pixels, image.pixels}, 0).detach(), ColorSpace::kSRGB);
}

}  // namespace mattevit
