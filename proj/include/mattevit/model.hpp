#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mattevit/image.hpp"
#include "mattevit/matte.hpp"
#include "mattevit/parameters.hpp"
#include "mattevit/tensor.hpp"

namespace mattevit {

enum class GuidanceMode { kNone, kBinary, kMatte };

std::string to_string(GuidanceMode mode);
/// Accepts "none", "binary" or "matte"; throws ConfigError otherwise.
GuidanceMode parse_guidance(const std::string& text);

struct ModelConfig {
  std::size_t patch_size = 4;
  std::size_t embed_dim = 64;
  std::size_t depth = 4;
  std::size_t num_heads = 4;
  std::size_t mlp_ratio = 4;
  GuidanceMode guidance = GuidanceMode::kMatte;
  bool hfam_enabled = true;
  std::size_t hfam_kernel = 5;
  double hfam_sigma = 1.0;
  bool hfam_trainable_kernel = false;
  /// Training resolution; fixes the positional-embedding grid.
  std::size_t image_size = 64;

  std::size_t input_channels() const { return guidance == GuidanceMode::kNone ? 3 : 4; }
  std::size_t grid() const { return image_size / patch_size; }
  void validate() const;
};

/// Closed-form number of trainable scalars for a configuration.
std::size_t parameter_count(const ModelConfig& config);
/// Trainable scalars contributed by HFAM alone (0 when disabled).
std::size_t hfam_parameter_count(const ModelConfig& config);

/// Normalized 2-D Gaussian replicated per channel, [channels, k, k].
Tensor gaussian_kernel(std::size_t channels, std::size_t size, double sigma);

/// [RGB; guidance] along channels. Guidance is required unless the mode is
/// kNone, and ignored in that case.
Tensor assemble_input(const Image& shadow, const std::optional<Tensor>& guidance, GuidanceMode mode);

/// [C, H, W] -> [N, C*p*p] with patches in row-major grid order.
Tensor patchify(const Tensor& x, std::size_t patch);
/// Inverse of patchify for the given channel count and grid.
Tensor unpatchify(const Tensor& tokens, std::size_t channels, std::size_t grid_h, std::size_t grid_w,
                  std::size_t patch);

/// [N, D] <-> [D, gh, gw].
Tensor tokens_to_map(const Tensor& tokens, std::size_t grid_h, std::size_t grid_w);
Tensor map_to_tokens(const Tensor& map);

struct HfamParams {
  Tensor kernel;  // [D, k, k]
  Tensor fc1_weight, fc1_bias;          // D -> D/2
  Tensor gamma_weight, gamma_bias;      // D/2 -> D
  Tensor beta_weight, beta_bias;        // D/2 -> D
};

/// Intermediate values of one HFAM pass, all in [D, gh, gw] layout except
/// gamma and beta ([D]).
struct HfamTrace {
  Tensor x, low, high, gamma, beta;
};

/// X' = X + gamma * X_HF + beta with X_HF = X - gauss * X and (gamma, beta)
/// predicted from the spatial mean of X_HF.
Tensor hfam_forward(const Tensor& tokens, std::size_t grid_h, std::size_t grid_w, const HfamParams& params,
                    HfamTrace* trace = nullptr);

struct BlockParams {
  Tensor ln1_weight, ln1_bias;
  Tensor qkv_weight, qkv_bias;    // D -> 3D
  Tensor proj_weight, proj_bias;  // D -> D
  Tensor ln2_weight, ln2_bias;
  Tensor fc1_weight, fc1_bias;    // D -> rD
  Tensor fc2_weight, fc2_bias;    // rD -> D
};

/// Multi-head self-attention on [N, D]. When weights is given it receives
/// the softmax attention, [heads, N, N].
Tensor self_attention(const Tensor& x, const BlockParams& p, std::size_t heads, Tensor* weights = nullptr);

/// Pre-norm block: x + attn(ln1(x)), then + mlp(ln2(.)).
Tensor transformer_block(const Tensor& x, const BlockParams& p, std::size_t heads);

class MatteViT {
 public:
  MatteViT() = default;
  MatteViT(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// Assembled input [Cin, H, W] -> restored RGB [3, H, W] in [0, 1].
  /// H and W must equal the configured image size.
  Tensor forward(const Tensor& input) const;

  /// Full inference: predicts guidance with the (frozen) generator when the
  /// mode needs it, then runs forward without gradient recording.
  Image restore(const Image& shadow, const MatteGenerator* generator, double threshold = 0.1) const;

  HfamParams hfam() const;
  BlockParams block(std::size_t index) const;

 private:
  ModelConfig config_;
  ParameterSet params_;
  Tensor kernel_buffer_;  // frozen Gaussian when the kernel is not trained
};

/// Guidance tensor for a shadow image under a mode: the generator's matte,
/// its binarization, or nothing.
std::optional<Tensor> predict_guidance(const Image& shadow, GuidanceMode mode, const MatteGenerator* generator,
                                       double threshold = 0.1);

}  // namespace mattevit
