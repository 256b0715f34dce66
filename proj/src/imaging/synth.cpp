#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mattevit/errors.hpp"
#include "mattevit/image.hpp"
#include "mattevit/random.hpp"

namespace mattevit {

namespace {

constexpr double kPi = 3.14159265358979323846;

double smoothstep(double edge0, double edge1, double x) {
  if (x <= edge0) return 0.0;
  if (x >= edge1) return 1.0;
  const double t = (x - edge0) / (edge1 - edge0);
  return t * t * (3.0 - 2.0 * t);
}

// Off-white page with rows of 3x5 pseudo-glyphs.
Image render_page(Rng& rng, std::size_t h, std::size_t w) {
  const std::size_t plane = h * w;
  std::vector<double> px(3 * plane);
  const double base = rng.uniform(0.88, 0.97);
  const double tint[3] = {base, base - rng.uniform(0.0, 0.03), base - rng.uniform(0.0, 0.06)};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) px[c * plane + i] = tint[c] + rng.uniform(-0.01, 0.01);

  const double ink = rng.uniform(0.08, 0.25);
  const std::size_t cell = std::max<std::size_t>(1, std::min(h, w) / 32);
  const std::size_t glyph_w = 3 * cell, glyph_h = 5 * cell;
  const std::size_t margin = 2 * cell;
  const std::size_t line_step = glyph_h + 2 * cell;
  for (std::size_t top = margin; top + glyph_h + margin <= h; top += line_step) {
    std::size_t left = margin;
    while (left + glyph_w + margin <= w) {
      if (rng.uniform() < 0.15) {  // word gap
        left += glyph_w + cell;
        continue;
      }
      unsigned bits = static_cast<unsigned>(rng.next() & 0x7fff);
      for (std::size_t gy = 0; gy < 5; ++gy)
        for (std::size_t gx = 0; gx < 3; ++gx) {
          if (!((bits >> (gy * 3 + gx)) & 1u)) continue;
          for (std::size_t dy = 0; dy < cell; ++dy)
            for (std::size_t dx = 0; dx < cell; ++dx) {
              const std::size_t i = (top + gy * cell + dy) * w + left + gx * cell + dx;
              for (std::size_t c = 0; c < 3; ++c) px[c * plane + i] = ink;
            }
        }
      left += glyph_w + cell;
    }
  }
  for (double& v : px) v = std::clamp(v, 0.0, 1.0);
  return Image(Tensor({3, h, w}, std::move(px)), ColorSpace::kSRGB);
}

}  // namespace

ShadowPair synth_shadow_pair(std::uint64_t seed, std::size_t height, std::size_t width,
                             const SynthOptions& options) {
  if (height < 16 || width < 16) {
    throw ShapeError("synthetic pairs need at least 16x16 pixels, got " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  if (!(options.max_shadow_depth >= 0.0 && options.max_shadow_depth < 1.0)) {
    throw ConfigError("max_shadow_depth must be in [0, 1)");
  }
  if (!(options.penumbra > 0.0)) throw ConfigError("penumbra must be positive");

  Rng page_rng(derive_seed(seed, "page"));
  Rng shadow_rng(derive_seed(seed, "shadow"));
  Image free = render_page(page_rng, height, width);

  // Soft half-plane shadow: attenuation = 1 - depth * smoothstep(signed distance).
  const double theta = shadow_rng.uniform(0.0, 2.0 * kPi);
  const double nx = std::cos(theta), ny = std::sin(theta);
  const double diag = std::hypot(static_cast<double>(height), static_cast<double>(width));
  const double cx = shadow_rng.uniform(0.3, 0.7) * static_cast<double>(width);
  const double cy = shadow_rng.uniform(0.3, 0.7) * static_cast<double>(height);
  const double depth = options.max_shadow_depth * shadow_rng.uniform(0.5, 1.0);
  const double half = 0.5 * options.penumbra;

  const std::size_t plane = height * width;
  std::vector<double> atten(plane);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double d = ((static_cast<double>(x) + 0.5 - cx) * nx + (static_cast<double>(y) + 0.5 - cy) * ny) / diag;
      atten[y * width + x] = 1.0 - depth * smoothstep(-half, half, d);
    }

  const Image free_lab = rgb_to_lab(free);
  std::vector<double> lab(free_lab.pixels.data().begin(), free_lab.pixels.data().end());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) lab[c * plane + i] *= atten[i];
  const Image shaded = lab_to_rgb(Image(Tensor({3, height, width}, std::move(lab)), ColorSpace::kLAB));

  // Unshadowed pixels are copied so the pair agrees exactly outside the shadow.
  std::vector<double> out(shaded.pixels.data().begin(), shaded.pixels.data().end());
  auto fpx = free.pixels.data();
  for (std::size_t i = 0; i < plane; ++i) {
    if (atten[i] == 1.0) {
      for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = fpx[c * plane + i];
    }
  }
  return ShadowPair{Image(Tensor({3, height, width}, std::move(out)), ColorSpace::kSRGB), free,
                    Tensor({1, height, width}, std::move(atten))};
}

std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root,
                                                 std::size_t count, std::uint64_t seed,
                                                 std::size_t height, std::size_t width,
                                                 const SynthOptions& options) {
  std::vector<std::string> stems;
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04zu", i);
    const auto pair = synth_shadow_pair(derive_seed(seed, name), height, width, options);
    save_image(pair.shadow, root / "shadow" / (std::string(name) + ".png"));
    save_image(pair.shadow_free, root / "shadow_free" / (std::string(name) + ".png"));
    stems.emplace_back(name);
  }
  return stems;
}

}  // namespace mattevit
