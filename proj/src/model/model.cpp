#include "mattevit/model.hpp"

#include <cmath>

#include "mattevit/errors.hpp"
#include "mattevit/ops.hpp"
#include "mattevit/random.hpp"

namespace mattevit {

std::string to_string(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::kNone: return "none";
    case GuidanceMode::kBinary: return "binary";
    case GuidanceMode::kMatte: return "matte";
  }
  return "unknown";
}

GuidanceMode parse_guidance(const std::string& text) {
  if (text == "none") return GuidanceMode::kNone;
  if (text == "binary") return GuidanceMode::kBinary;
  if (text == "matte") return GuidanceMode::kMatte;
  throw ConfigError("unknown guidance mode '" + text + "' (expected none, binary or matte)");
}

void ModelConfig::validate() const {
  if (patch_size == 0) throw ConfigError("patch_size must be positive");
  if (embed_dim < 2 || embed_dim % 2) throw ConfigError("embed_dim must be even and at least 2");
  if (num_heads == 0 || embed_dim % num_heads) {
    throw ConfigError("embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be positive");
  if (image_size == 0 || image_size % patch_size) {
    throw ConfigError("patch_size " + std::to_string(patch_size) + " does not divide image_size " +
                      std::to_string(image_size));
  }
  if (hfam_kernel % 2 == 0) throw ConfigError("hfam_kernel must be odd");
  if (!(hfam_sigma > 0.0)) throw ConfigError("hfam_sigma must be positive");
}

std::size_t hfam_parameter_count(const ModelConfig& c) {
  if (!c.hfam_enabled) return 0;
  const std::size_t d = c.embed_dim, h = d / 2;
  std::size_t n = d * h + h + 2 * (h * d + d);
  if (c.hfam_trainable_kernel) n += d * c.hfam_kernel * c.hfam_kernel;
  return n;
}

std::size_t parameter_count(const ModelConfig& c) {
  c.validate();
  const std::size_t d = c.embed_dim, p2 = c.patch_size * c.patch_size, n = c.grid() * c.grid();
  const std::size_t r = c.mlp_ratio * d;
  const std::size_t embed = c.input_channels() * p2 * d + d + n * d;
  const std::size_t block = 4 * d + (3 * d * d + 3 * d) + (d * d + d) + (d * r + r) + (r * d + d);
  const std::size_t head = 2 * d + d * 3 * p2 + 3 * p2;
  return embed + hfam_parameter_count(c) + c.depth * block + head;
}

Tensor gaussian_kernel(std::size_t channels, std::size_t size, double sigma) {
  if (size % 2 == 0) throw ConfigError("Gaussian kernel size must be odd");
  const long r = static_cast<long>(size / 2);
  std::vector<double> k(size * size);
  double total = 0.0;
  for (long i = -r; i <= r; ++i)
    for (long j = -r; j <= r; ++j) {
      const double v = std::exp(-static_cast<double>(i * i + j * j) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>((i + r) * static_cast<long>(size) + j + r)] = v;
      total += v;
    }
  for (double& v : k) v /= total;
  std::vector<double> out;
  out.reserve(channels * k.size());
  for (std::size_t c = 0; c < channels; ++c) out.insert(out.end(), k.begin(), k.end());
  return Tensor({channels, size, size}, std::move(out));
}

Tensor assemble_input(const Image& shadow, const std::optional<Tensor>& guidance, GuidanceMode mode) {
  const Tensor rgb = to_rgb(shadow).pixels;
  if (mode == GuidanceMode::kNone) return rgb;
  if (!guidance) throw ConfigError("guidance mode " + to_string(mode) + " requires a guidance map");
  const Shape want{1, rgb.dim(1), rgb.dim(2)};
  if (guidance->shape() != want) {
    throw ShapeError("guidance " + shape_to_string(guidance->shape()) + " does not match image " +
                     shape_to_string(want));
  }
  return concat({rgb, *guidance}, 0);
}

Tensor patchify(const Tensor& x, std::size_t p) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % p || w % p) {
    throw ShapeError("image " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by patch size " +
                     std::to_string(p));
  }
  const std::size_t gh = h / p, gw = w / p;
  const Tensor t = permute(reshape(x, {c, gh, p, gw, p}), {1, 3, 0, 2, 4});
  return reshape(t, {gh * gw, c * p * p});
}

Tensor unpatchify(const Tensor& tokens, std::size_t c, std::size_t gh, std::size_t gw, std::size_t p) {
  if (tokens.shape() != Shape{gh * gw, c * p * p}) {
    throw ShapeError("cannot unpatchify " + shape_to_string(tokens.shape()) + " to " + std::to_string(c) +
                     " channels on a " + std::to_string(gh) + "x" + std::to_string(gw) + " grid");
  }
  const Tensor t = permute(reshape(tokens, {gh, gw, c, p, p}), {2, 0, 3, 1, 4});
  return reshape(t, {c, gh * p, gw * p});
}

Tensor tokens_to_map(const Tensor& tokens, std::size_t gh, std::size_t gw) {
  if (tokens.rank() != 2 || tokens.dim(0) != gh * gw) {
    throw ShapeError("tokens " + shape_to_string(tokens.shape()) + " do not match a " + std::to_string(gh) + "x" +
                     std::to_string(gw) + " grid");
  }
  return permute(reshape(tokens, {gh, gw, tokens.dim(1)}), {2, 0, 1});
}

Tensor map_to_tokens(const Tensor& map) {
  const std::size_t d = map.dim(0), gh = map.dim(1), gw = map.dim(2);
  return reshape(permute(map, {1, 2, 0}), {gh * gw, d});
}

Tensor hfam_forward(const Tensor& tokens, std::size_t gh, std::size_t gw, const HfamParams& p, HfamTrace* trace) {
  const Tensor x = tokens_to_map(tokens, gh, gw);
  const std::size_t d = x.dim(0);
  const Tensor low = conv2d_depthwise(x, p.kernel);
  const Tensor high = x - low;
  const Tensor pooled = reshape(mean(high, {1, 2}), {1, d});
  const Tensor hidden = gelu(linear(pooled, p.fc1_weight, p.fc1_bias));
  const Tensor gamma = reshape(linear(hidden, p.gamma_weight, p.gamma_bias), {d, 1, 1});
  const Tensor beta = reshape(linear(hidden, p.beta_weight, p.beta_bias), {d, 1, 1});
  const Tensor out = (x + gamma * high) + beta;
  if (trace) *trace = HfamTrace{x, low, high, reshape(gamma, {d}), reshape(beta, {d})};
  return map_to_tokens(out);
}

Tensor self_attention(const Tensor& x, const BlockParams& p, std::size_t heads, Tensor* weights) {
  const std::size_t n = x.dim(0), d = x.dim(1), hd = d / heads;
  const Tensor qkv = permute(reshape(linear(x, p.qkv_weight, p.qkv_bias), {n, 3, heads, hd}), {1, 2, 0, 3});
  const Tensor q = reshape(slice(qkv, 0, 0, 1), {heads, n, hd});
  const Tensor k = reshape(slice(qkv, 0, 1, 1), {heads, n, hd});
  const Tensor v = reshape(slice(qkv, 0, 2, 1), {heads, n, hd});
  const Tensor attn = softmax(matmul(q, transpose(k)) * (1.0 / std::sqrt(static_cast<double>(hd))), 2);
  if (weights) *weights = attn;
  const Tensor o = reshape(permute(matmul(attn, v), {1, 0, 2}), {n, d});
  return linear(o, p.proj_weight, p.proj_bias);
}

Tensor transformer_block(const Tensor& x, const BlockParams& p, std::size_t heads) {
  const Tensor h = x + self_attention(layer_norm(x, p.ln1_weight, p.ln1_bias), p, heads);
  const Tensor m = linear(gelu(linear(layer_norm(h, p.ln2_weight, p.ln2_bias), p.fc1_weight, p.fc1_bias)),
                          p.fc2_weight, p.fc2_bias);
  return h + m;
}

MatteViT::MatteViT(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t d = config_.embed_dim, p2 = config_.patch_size * config_.patch_size;
  const std::size_t n = config_.grid() * config_.grid(), r = config_.mlp_ratio * d;
  auto lecun = [](Rng& rng, std::size_t in, std::size_t out) {
    return random_normal({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)), true);
  };

  Rng embed_rng(derive_seed(seed, "embed"));
  const std::size_t in = config_.input_channels() * p2;
  params_.add("embed.weight", lecun(embed_rng, in, d));
  params_.add("embed.bias", Tensor::zeros({d}, true));
  params_.add("embed.pos", Tensor::zeros({n, d}, true));

  kernel_buffer_ = gaussian_kernel(d, config_.hfam_kernel, config_.hfam_sigma);
  if (config_.hfam_enabled) {
    Rng rng(derive_seed(seed, "hfam"));
    if (config_.hfam_trainable_kernel) params_.add("hfam.kernel", kernel_buffer_.clone(true));
    params_.add("hfam.fc1.weight", lecun(rng, d, d / 2));
    params_.add("hfam.fc1.bias", Tensor::zeros({d / 2}, true));
    params_.add("hfam.gamma.weight", Tensor::zeros({d / 2, d}, true));
    params_.add("hfam.gamma.bias", Tensor::zeros({d}, true));
    params_.add("hfam.beta.weight", Tensor::zeros({d / 2, d}, true));
    params_.add("hfam.beta.bias", Tensor::zeros({d}, true));
  }

  for (std::size_t b = 0; b < config_.depth; ++b) {
    Rng rng(derive_seed(seed, "block" + std::to_string(b)));
    const std::string pre = "blocks." + std::to_string(b) + ".";
    params_.add(pre + "ln1.weight", Tensor::ones({d}, true));
    params_.add(pre + "ln1.bias", Tensor::zeros({d}, true));
    params_.add(pre + "qkv.weight", lecun(rng, d, 3 * d));
    params_.add(pre + "qkv.bias", Tensor::zeros({3 * d}, true));
    params_.add(pre + "proj.weight", lecun(rng, d, d));
    params_.add(pre + "proj.bias", Tensor::zeros({d}, true));
    params_.add(pre + "ln2.weight", Tensor::ones({d}, true));
    params_.add(pre + "ln2.bias", Tensor::zeros({d}, true));
    params_.add(pre + "fc1.weight", lecun(rng, d, r));
    params_.add(pre + "fc1.bias", Tensor::zeros({r}, true));
    params_.add(pre + "fc2.weight", lecun(rng, r, d));
    params_.add(pre + "fc2.bias", Tensor::zeros({d}, true));
  }

  params_.add("norm.weight", Tensor::ones({d}, true));
  params_.add("norm.bias", Tensor::zeros({d}, true));
  params_.add("head.weight", Tensor::zeros({d, 3 * p2}, true));
  params_.add("head.bias", Tensor::zeros({3 * p2}, true));
}

HfamParams MatteViT::hfam() const {
  if (!config_.hfam_enabled) throw ContractError("HFAM is disabled in this model");
  return HfamParams{config_.hfam_trainable_kernel ? params_.at("hfam.kernel") : kernel_buffer_,
                    params_.at("hfam.fc1.weight"),   params_.at("hfam.fc1.bias"),
                    params_.at("hfam.gamma.weight"), params_.at("hfam.gamma.bias"),
                    params_.at("hfam.beta.weight"),  params_.at("hfam.beta.bias")};
}

BlockParams MatteViT::block(std::size_t index) const {
  const std::string pre = "blocks." + std::to_string(index) + ".";
  auto at = [&](const char* name) { return params_.at(pre + name); };
  return BlockParams{at("ln1.weight"), at("ln1.bias"), at("qkv.weight"), at("qkv.bias"),
                     at("proj.weight"), at("proj.bias"), at("ln2.weight"), at("ln2.bias"),
                     at("fc1.weight"), at("fc1.bias"), at("fc2.weight"), at("fc2.bias")};
}

Tensor MatteViT::forward(const Tensor& input) const {
  const std::size_t s = config_.image_size, cin = config_.input_channels();
  if (input.shape() != Shape{cin, s, s}) {
    throw ShapeError("model expects input " + shape_to_string({cin, s, s}) + ", got " +
                     shape_to_string(input.shape()) + "; resize images to " + std::to_string(s) + "x" +
                     std::to_string(s));
  }
  const std::size_t g = config_.grid(), p = config_.patch_size;
  Tensor tokens = linear(patchify(input, p), params_.at("embed.weight"), params_.at("embed.bias")) +
                  params_.at("embed.pos");
  if (config_.hfam_enabled) tokens = hfam_forward(tokens, g, g, hfam());
  for (std::size_t b = 0; b < config_.depth; ++b) tokens = transformer_block(tokens, block(b), config_.num_heads);
  tokens = layer_norm(tokens, params_.at("norm.weight"), params_.at("norm.bias"));
  const Tensor delta = unpatchify(linear(tokens, params_.at("head.weight"), params_.at("head.bias")), 3, g, g, p);
  return clamp(slice(input, 0, 0, 3) + delta, 0.0, 1.0);
}

std::optional<Tensor> predict_guidance(const Image& shadow, GuidanceMode mode, const MatteGenerator* generator,
                                       double threshold) {
  if (mode == GuidanceMode::kNone) return std::nullopt;
  if (!generator) throw ConfigError("guidance mode " + to_string(mode) + " needs a matte generator");
  const Tensor m = generator->predict(shadow).values;
  return mode == GuidanceMode::kBinary ? binarize_matte(m, threshold) : m;
}

Image MatteViT::restore(const Image& shadow, const MatteGenerator* generator, double threshold) const {
  const auto guidance = predict_guidance(shadow, config_.guidance, generator, threshold);
  NoGradGuard guard;
  return Image(forward(assemble_input(shadow, guidance, config_.guidance)), ColorSpace::kSRGB);
}

}  // namespace mattevit
