#include "mattevit/gradcheck.hpp"
#include "mattevit/losses.hpp"
#include "mattevit/ops.hpp"
#include "mattevit/pipeline.hpp"
#include "mattevit/random.hpp"

namespace mattevit {

std::vector<GradAuditEntry> gradient_audit(std::uint64_t seed) {
  constexpr double kOp = 1e-3;
  constexpr double kModel = 1e-2;
  Rng rng(derive_seed(seed, "gradient_audit"));
  std::vector<GradAuditEntry> out;
  auto unary = [&](std::string name, const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
    out.push_back({std::move(name), gradient_check(f, x), kOp});
  };

  // Positive inputs keep log, sqrt, pow and div on their smooth domain.
  const Tensor a = random_uniform({3, 4}, rng, 0.5, 2.0);
  const Tensor b = random_uniform({4}, rng, 0.5, 2.0);
  const Tensor probe = random_normal({3, 4}, rng);
  auto weighted = [probe](const Tensor& t) { return sum(mul(t, probe)); };

  unary("add", [&](const Tensor& t) { return weighted(add(t, b)); }, a);
  unary("add (broadcast operand)", [&](const Tensor& t) { return weighted(add(a, t)); }, b);
  unary("sub", [&](const Tensor& t) { return weighted(sub(a, t)); }, b);
  unary("mul", [&](const Tensor& t) { return weighted(mul(a, t)); }, b);
  unary("div numerator", [&](const Tensor& t) { return weighted(div(t, b)); }, a);
  unary("div denominator", [&](const Tensor& t) { return weighted(div(a, t)); }, b);
  unary("pow base", [&](const Tensor& t) { return weighted(pow(t, b)); }, a);
  unary("pow exponent", [&](const Tensor& t) { return weighted(pow(a, t)); }, b);
  unary("pow scalar", [&](const Tensor& t) { return weighted(pow(t, 2.5)); }, a);
  unary("rsub", [&](const Tensor& t) { return weighted(rsub(1.0, t)); }, a);
  unary("neg", [&](const Tensor& t) { return weighted(neg(t)); }, a);
  unary("sqrt", [&](const Tensor& t) { return weighted(sqrt(t)); }, a);
  unary("abs", [&](const Tensor& t) { return weighted(abs(sub(t, 1.2))); }, a);
  unary("exp", [&](const Tensor& t) { return weighted(exp(t)); }, a);
  unary("log", [&](const Tensor& t) { return weighted(log(t)); }, a);
  unary("clamp", [&](const Tensor& t) { return weighted(clamp(t, 0.8, 1.5)); }, a);
  unary("relu", [&](const Tensor& t) { return weighted(relu(sub(t, 1.2))); }, a);
  unary("sigmoid", [&](const Tensor& t) { return weighted(sigmoid(t)); }, a);
  unary("gelu", [&](const Tensor& t) { return weighted(gelu(sub(t, 1.2))); }, a);
  unary("softmax", [&](const Tensor& t) { return weighted(softmax(t, 1)); }, a);
  unary("sum over axis", [&](const Tensor& t) { return sum(mul(sum(t, {1}), Tensor::from({1, 2, 3}))); }, a);
  unary("mean over axis", [&](const Tensor& t) { return sum(mul(mean(t, {0}), b)); }, a);
  unary("reshape + transpose", [&](const Tensor& t) { return weighted(transpose(reshape(t, {4, 3}))); }, a);
  const Tensor perm_probe = random_normal({2, 3, 2}, rng);
  unary("permute", [&](const Tensor& t) { return sum(mul(permute(reshape(t, {3, 2, 2}), {2, 0, 1}), perm_probe)); },
        a);
  unary("concat", [&](const Tensor& t) { return sum(pow(concat({t, a, t}, 1), 2.0)); }, a);
  unary("slice", [&](const Tensor& t) { return sum(pow(slice(t, 1, 1, 2), 3.0)); }, a);

  const Tensor lin_w = random_normal({4, 2}, rng);
  const Tensor lin_b = Tensor::from({0.1, 0.2});
  unary("matmul", [&](const Tensor& t) { return sum(pow(linear(t, lin_w, lin_b), 2.0)); }, a);
  unary("linear weight", [&](const Tensor& t) { return sum(pow(linear(a, t, lin_b), 2.0)); }, lin_w);
  const Tensor bm = random_normal({2, 4, 3}, rng);
  unary("batched matmul", [&](const Tensor& t) { return sum(pow(matmul(t, bm), 2.0)); }, random_normal({2, 3, 4}, rng));

  const Tensor ln_w = random_uniform({4}, rng, 0.5, 1.5);
  const Tensor ln_b = random_normal({4}, rng);
  unary("layer_norm", [&](const Tensor& t) { return weighted(layer_norm(t, ln_w, ln_b)); }, random_normal({3, 4}, rng));
  unary("layer_norm weight", [&](const Tensor& t) { return weighted(layer_norm(a, t, ln_b)); }, ln_w);

  const Tensor img = random_normal({2, 6, 6}, rng);
  const Tensor w = random_normal({3, 2, 3, 3}, rng);
  const Tensor bias = random_normal({3}, rng);
  const Tensor probe_out = random_normal({3, 6, 6}, rng);
  unary("conv2d input", [&](const Tensor& t) { return sum(mul(conv2d(t, w, bias), probe_out)); }, img);
  unary("conv2d weight", [&](const Tensor& t) { return sum(mul(conv2d(img, t, bias), probe_out)); }, w);
  unary("conv2d bias", [&](const Tensor& t) { return sum(mul(conv2d(img, w, t), probe_out)); }, bias);
  const Tensor dk = random_normal({2, 3, 3}, rng);
  const Tensor dprobe = random_normal({2, 6, 6}, rng);
  unary("depthwise input", [&](const Tensor& t) { return sum(mul(conv2d_depthwise(t, dk), dprobe)); }, img);
  unary("depthwise kernel", [&](const Tensor& t) { return sum(mul(conv2d_depthwise(img, t), dprobe)); }, dk);
  const Tensor pool_probe = random_normal({2, 3, 3}, rng);
  unary("max_pool2", [&](const Tensor& t) { return sum(mul(max_pool2(t), pool_probe)); }, img);
  unary("upsample_nearest2", [&](const Tensor& t) { return sum(pow(upsample_nearest2(t), 2.0)); }, img);
  unary("fft2 + magnitude", [&](const Tensor& t) {
    const Spectrum s = fft2(t);
    return sum(complex_abs(s.real, s.imag));
  }, random_normal({2, 4, 6}, rng));

  const Tensor gt = random_uniform({3, 8, 8}, rng, 0.2, 0.8);
  const Tensor pred = random_uniform({3, 8, 8}, rng, 0.2, 0.8);
  const Tensor edge = edge_weight_map(gt, 1.0);
  unary("charbonnier", [&](const Tensor& t) { return charbonnier_loss(t, gt, edge); }, pred);
  unary("fft loss", [&](const Tensor& t) { return fft_loss(t, gt); }, pred);

  MatteGenConfig mc;
  mc.depth = 1;
  mc.base_channels = 2;
  MatteGenerator gen(mc, derive_seed(seed, "audit/matte"));
  // With the zero-initialized biases a ReLU whose input window is all zeros
  // sits exactly on its kink, where central differences read 1/2.
  for (auto& [name, t] : gen.parameters()) {
    if (name.ends_with(".bias"))
      for (double& v : t.mutable_data()) v = 0.1 * rng.normal();
  }
  const Tensor mx = random_uniform({3, 4, 4}, rng, 0.0, 1.0);
  const Tensor mt = random_uniform({1, 4, 4}, rng, 0.0, 1.0);
  out.push_back({"matte generator + matte loss",
                 gradient_check([&] { return matte_loss(gen.forward(mx), mt); }, gen.parameters().tensors(), 1e-6),
                 kOp});

  // Freshly initialised zero heads would hide most of the model from the
  // check, so every parameter gets a random value first.
  ModelConfig c;
  c.image_size = 8;
  c.embed_dim = 8;
  c.depth = 1;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  MatteViT model(c, derive_seed(seed, "audit/model"));
  for (auto& [name, t] : model.parameters()) {
    const bool gain = name.find("ln") != std::string::npos || name == "norm.weight";
    for (double& v : t.mutable_data()) v = (gain ? 1.0 : 0.0) + 0.2 * rng.normal();
  }
  const Tensor x = random_uniform({4, 8, 8}, rng, 0.3, 0.7);
  const Tensor target = random_uniform({3, 8, 8}, rng, 0.3, 0.7);
  out.push_back({"MatteViT forward + total loss (8x8, depth 1)",
                 gradient_check([&] { return total_loss(model.forward(x), target).total; },
                                model.parameters().tensors()),
                 kModel});
  return out;
}

}  // namespace mattevit
