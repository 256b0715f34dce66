#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mattevit/image.hpp"
#include "mattevit/parameters.hpp"
#include "mattevit/tensor.hpp"

namespace mattevit {

/// Per-pixel shadow intensity in [0, 1], shape [1, H, W].
struct ShadowMatte {
  Tensor values;
  double epsilon_used = 0.0;
};

struct MatteGenConfig {
  std::size_t depth = 4;
  std::size_t base_channels = 16;
  double w_l1 = 0.7;
  double w_bce = 0.3;
  double lr = 5e-6;
  std::size_t batch = 8;
  std::size_t epochs = 200;

  /// Throws ConfigError when the weights do not sum to 1 or lr <= 0.
  void validate() const;
};

/// clamp(1 - L_shadow / (L_free + eps), 0, 1) on the L* channel. Inputs may
/// be sRGB or already LAB; the two images must have the same size.
ShadowMatte compute_matte(const Image& shadow, const Image& shadow_free, double epsilon = 1e-6);

struct MatteBuildReport {
  std::size_t written = 0;
  std::vector<std::string> problems;
};

/// Writes `<out_root>/<stem>.png` (8-bit gray, round(matte * 255)) for every
/// matched pair under `pairs_root`. Problem pairs are reported and skipped.
MatteBuildReport build_matte_dataset(const std::filesystem::path& pairs_root,
                                     const std::filesystem::path& out_root,
                                     double epsilon = 1e-6);

/// Reads an 8-bit matte PNG back into [0, 1].
ShadowMatte load_matte(const std::filesystem::path& path);

/// U-Net mapping an sRGB image to a matte. Each encoder level runs two 3x3
/// conv + ReLU layers and halves the resolution; each decoder level upsamples
/// (nearest + 3x3 conv), concatenates the skip and runs two more convs. A 1x1
/// conv and a sigmoid produce the output.
class MatteGenerator {
 public:
  MatteGenerator() = default;
  MatteGenerator(const MatteGenConfig& config, std::uint64_t seed);

  const MatteGenConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// x: [3, H, W] with H and W divisible by 2^depth. Returns [1, H, W] in (0, 1).
  Tensor forward(const Tensor& x) const;

  /// Forward pass without gradient recording.
  ShadowMatte predict(const Image& shadow) const;

 private:
  Tensor conv(const std::string& name, const Tensor& x) const;

  MatteGenConfig config_;
  ParameterSet params_;
};

/// w_l1 * mean|pred - target| + w_bce * mean BCE(pred, target), with the BCE
/// input clamped to [1e-7, 1 - 1e-7].
Tensor matte_loss(const Tensor& pred, const Tensor& target, double w_l1 = 0.7, double w_bce = 0.3);

/// 1 where matte >= threshold, else 0. threshold must lie in (0, 1).
Tensor binarize_matte(const Tensor& matte, double threshold = 0.1);

}  // namespace mattevit
