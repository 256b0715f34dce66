#include <algorithm>
#include <cmath>

#include "mattevit/errors.hpp"
#include "mattevit/image.hpp"

namespace mattevit {

namespace {

struct ChannelRange {
  double lo, hi;
};

ChannelRange channel_range(ColorSpace space, std::size_t c) {
  if (space == ColorSpace::kLAB) return c == 0 ? ChannelRange{0.0, 100.0} : ChannelRange{-128.0, 127.0};
  return {0.0, 1.0};
}

}  // namespace

std::string to_string(ColorSpace space) {
  switch (space) {
    case ColorSpace::kSRGB: return "sRGB";
    case ColorSpace::kLAB: return "LAB";
    case ColorSpace::kGray: return "GRAY";
  }
  return "unknown";
}

Image::Image(Tensor px, ColorSpace sp) : pixels(std::move(px)), space(sp) {
  if (pixels.rank() != 3) {
    throw ShapeError("image pixels must be [C,H,W], got " + shape_to_string(pixels.shape()));
  }
  const std::size_t c = pixels.dim(0);
  if ((space == ColorSpace::kSRGB || space == ColorSpace::kLAB) && c != 3) {
    throw ShapeError(to_string(space) + " images need 3 channels, got " + std::to_string(c));
  }
  if (space == ColorSpace::kGray && c != 1) {
    throw ShapeError("gray images need 1 channel, got " + std::to_string(c));
  }
}

Image Image::zeros(std::size_t channels, std::size_t height, std::size_t width, ColorSpace space) {
  return Image(Tensor::zeros({channels, height, width}), space);
}

Image Image::clamped() const {
  const std::size_t plane = height() * width();
  std::vector<double> v(pixels.data().begin(), pixels.data().end());
  for (std::size_t c = 0; c < channels(); ++c) {
    const auto r = channel_range(space, c);
    for (std::size_t i = 0; i < plane; ++i) v[c * plane + i] = std::clamp(v[c * plane + i], r.lo, r.hi);
  }
  return Image(Tensor(pixels.shape(), std::move(v)), space);
}

bool Image::within_range() const {
  const std::size_t plane = height() * width();
  for (std::size_t c = 0; c < channels(); ++c) {
    const auto r = channel_range(space, c);
    for (std::size_t i = 0; i < plane; ++i) {
      const double v = pixels[c * plane + i];
      if (!(v >= r.lo && v <= r.hi)) return false;
    }
  }
  return true;
}

Image resize_bilinear(const Image& image, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ShapeError("resize target must be at least 1x1");
  const std::size_t c = image.channels(), h = image.height(), w = image.width();
  auto src_coord = [](std::size_t dst, std::size_t in, std::size_t out) {
    const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  std::vector<double> out(c * out_h * out_w);
  auto px = image.pixels.data();
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = src_coord(y, h, out_h);
    const std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = src_coord(x, w, out_w);
      const std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = sx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* p = px.data() + ch * h * w;
        const double top = p[y0 * w + x0] * (1.0 - tx) + p[y0 * w + x1] * tx;
        const double bottom = p[y1 * w + x0] * (1.0 - tx) + p[y1 * w + x1] * tx;
        out[(ch * out_h + y) * out_w + x] = top * (1.0 - ty) + bottom * ty;
      }
    }
  }
  return Image(Tensor({c, out_h, out_w}, std::move(out)), image.space);
}

}  // namespace mattevit
