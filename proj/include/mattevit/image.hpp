#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mattevit/tensor.hpp"

namespace mattevit {

enum class ColorSpace { kSRGB, kLAB, kGray };

std::string to_string(ColorSpace space);

/// Raster of C x H x W float pixels in a declared color space.
///
/// sRGB and gray images hold values in [0, 1]; LAB images hold L in
/// [0, 100] and a, b in [-128, 127].
struct Image {
  Tensor pixels;
  ColorSpace space = ColorSpace::kSRGB;

  Image() = default;
  Image(Tensor pixels, ColorSpace space);

  static Image zeros(std::size_t channels, std::size_t height, std::size_t width,
                     ColorSpace space = ColorSpace::kSRGB);

  std::size_t channels() const { return pixels.dim(0); }
  std::size_t height() const { return pixels.dim(1); }
  std::size_t width() const { return pixels.dim(2); }

  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height() + y) * width() + x];
  }

  /// Clamps every channel into the declared range of the color space.
  Image clamped() const;
  bool within_range() const;
};

// ---- file I/O -------------------------------------------------------------

/// Reads an 8-bit PNG (gray, RGB or palette; an alpha channel is composited
/// away by libpng) or a binary PPM (P6, maxval 255). Gray files load as 1-channel
/// gray images, everything else as 3-channel sRGB.
Image load_image(const std::filesystem::path& path);

/// Writes a 1- or 3-channel image after clamping to [0, 1] and quantizing
/// to round(v * 255). The format follows the extension (.png or .ppm).
void save_image(const Image& image, const std::filesystem::path& path);

// ---- color ----------------------------------------------------------------

/// sRGB (D65, standard transfer curve) to CIE L*a*b*. Inputs are clamped to
/// [0, 1] first.
Image rgb_to_lab(const Image& rgb);
Image lab_to_rgb(const Image& lab);

/// Rec. 601 luma of an sRGB image as a 1-channel gray image. Gray inputs are
/// returned unchanged.
Image to_gray(const Image& image);

/// Replicates a gray image into three sRGB channels; sRGB inputs pass through.
Image to_rgb(const Image& image);

// ---- geometry -------------------------------------------------------------

/// Bilinear resampling with half-pixel centers (align_corners = false);
/// samples outside the source are clamped to the border.
Image resize_bilinear(const Image& image, std::size_t out_h, std::size_t out_w);

// ---- synthetic data -------------------------------------------------------

struct SynthOptions {
  /// Largest luminance attenuation, 1 - min(attenuation). 0 disables shadows.
  double max_shadow_depth = 0.6;
  /// Width of the soft penumbra as a fraction of the image diagonal.
  double penumbra = 0.12;
};

/// A generated document page with and without a cast shadow.
struct ShadowPair {
  Image shadow;
  Image shadow_free;
  /// Multiplicative luminance attenuation in (0, 1], 1 x H x W.
  Tensor attenuation;
};

/// Deterministic per (seed, h, w, options). The shadow image scales the
/// shadow-free L*a*b* values by the attenuation field, so its L channel is
/// never brighter than the shadow-free one. Requires h, w >= 16.
ShadowPair synth_shadow_pair(std::uint64_t seed, std::size_t height, std::size_t width,
                             const SynthOptions& options = {});

// ---- paired datasets ------------------------------------------------------

/// One matched sample of a `<root>/shadow`, `<root>/shadow_free` layout.
struct PairEntry {
  std::string stem;
  std::filesystem::path shadow;
  std::filesystem::path shadow_free;
  std::filesystem::path matte;  // empty when no precomputed matte exists
};

struct PairListing {
  std::vector<PairEntry> pairs;           // sorted by stem
  std::vector<std::string> unmatched;     // human-readable problems
};

/// Matches `<root>/shadow/*.png` with `<root>/shadow_free/*.png` by stem and
/// picks up `<root>/matte/<stem>.png` when present.
PairListing list_pairs(const std::filesystem::path& root);

/// Image files (.png, .ppm) directly inside a directory, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Writes a synthetic dataset in the paired layout; returns the stems.
std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root,
                                                 std::size_t count, std::uint64_t seed,
                                                 std::size_t height, std::size_t width,
                                                 const SynthOptions& options = {});

}  // namespace mattevit
