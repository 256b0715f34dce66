#include "mattevit/matte.hpp"

#include <algorithm>
#include <cmath>

#include "mattevit/errors.hpp"
#include "mattevit/ops.hpp"
#include "mattevit/random.hpp"

namespace mattevit {

namespace fs = std::filesystem;

void MatteGenConfig::validate() const {
  if (depth == 0) throw ConfigError("matte generator depth must be at least 1");
  if (base_channels == 0) throw ConfigError("matte generator base_channels must be positive");
  if (std::abs(w_l1 + w_bce - 1.0) > 1e-12) throw ConfigError("matte loss weights must sum to 1");
  if (w_l1 < 0.0 || w_bce < 0.0) throw ConfigError("matte loss weights must be nonnegative");
  if (!(lr > 0.0)) throw ConfigError("matte generator lr must be positive");
  if (batch == 0) throw ConfigError("matte generator batch must be positive");
}

ShadowMatte compute_matte(const Image& shadow, const Image& shadow_free, double epsilon) {
  if (shadow.height() != shadow_free.height() || shadow.width() != shadow_free.width()) {
    throw ShapeError("matte inputs differ in size: " + shape_to_string(shadow.pixels.shape()) + " vs " +
                     shape_to_string(shadow_free.pixels.shape()));
  }
  if (!(epsilon > 0.0)) throw ConfigError("matte epsilon must be positive");
  auto to_lab = [](const Image& img) {
    if (img.space == ColorSpace::kLAB) return img;
    return rgb_to_lab(to_rgb(img));
  };
  const Image ls = to_lab(shadow), lf = to_lab(shadow_free);
  const std::size_t plane = shadow.height() * shadow.width();
  std::vector<double> m(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    m[i] = std::clamp(1.0 - ls.pixels[i] / (lf.pixels[i] + epsilon), 0.0, 1.0);
  }
  return {Tensor({1, shadow.height(), shadow.width()}, std::move(m)), epsilon};
}

MatteBuildReport build_matte_dataset(const fs::path& pairs_root, const fs::path& out_root, double epsilon) {
  const PairListing listing = list_pairs(pairs_root);
  MatteBuildReport report;
  report.problems = listing.unmatched;
  for (const auto& pair : listing.pairs) {
    try {
      const Image s = load_image(pair.shadow);
      const Image f = load_image(pair.shadow_free);
      const ShadowMatte m = compute_matte(s, f, epsilon);
      save_image(Image(m.values, ColorSpace::kGray), out_root / (pair.stem + ".png"));
      ++report.written;
    } catch (const Error& e) {
      report.problems.push_back(pair.stem + ": " + e.what());
    }
  }
  return report;
}

ShadowMatte load_matte(const fs::path& path) {
  const Image img = load_image(path);
  if (img.space != ColorSpace::kGray) throw FormatError("matte " + path.string() + " is not grayscale");
  return {img.pixels, 0.0};
}

namespace {

std::string level_name(const char* part, std::size_t level, int idx) {
  return std::string(part) + std::to_string(level) + ".conv" + std::to_string(idx);
}

}  // namespace

MatteGenerator::MatteGenerator(const MatteGenConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(derive_seed(seed, "matte_generator"));
  auto add_conv = [&](const std::string& name, std::size_t cin, std::size_t cout, std::size_t k) {
    const double sd = std::sqrt(2.0 / static_cast<double>(cin * k * k));
    params_.add(name + ".weight", random_normal({cout, cin, k, k}, rng, sd, true));
    params_.add(name + ".bias", Tensor::zeros({cout}, true));
  };
  const std::size_t b = config_.base_channels;
  std::size_t cin = 3;
  for (std::size_t l = 0; l < config_.depth; ++l) {
    const std::size_t c = b << l;
    add_conv(level_name("enc", l, 0), cin, c, 3);
    add_conv(level_name("enc", l, 1), c, c, 3);
    cin = c;
  }
  const std::size_t cb = b << config_.depth;
  add_conv("mid.conv0", cin, cb, 3);
  add_conv("mid.conv1", cb, cb, 3);
  for (std::size_t l = config_.depth; l-- > 0;) {
    const std::size_t c = b << l;
    add_conv(level_name("dec", l, 0), c * 2, c, 3);  // after upsampling
    add_conv(level_name("dec", l, 1), c * 2, c, 3);  // after skip concat
    add_conv(level_name("dec", l, 2), c, c, 3);
  }
  add_conv("head", b, 1, 1);
}

Tensor MatteGenerator::conv(const std::string& name, const Tensor& x) const {
  return conv2d(x, params_.at(name + ".weight"), params_.at(name + ".bias"));
}

Tensor MatteGenerator::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != 3) {
    throw ShapeError("matte generator expects [3,H,W], got " + shape_to_string(x.shape()));
  }
  const std::size_t mult = std::size_t{1} << config_.depth;
  if (x.dim(1) % mult || x.dim(2) % mult) {
    throw ShapeError("matte generator input " + std::to_string(x.dim(1)) + "x" + std::to_string(x.dim(2)) +
                     " is not divisible by " + std::to_string(mult) + "; pad or resize to a multiple of " +
                     std::to_string(mult));
  }
  std::vector<Tensor> skips;
  Tensor h = x;
  for (std::size_t l = 0; l < config_.depth; ++l) {
    h = relu(conv(level_name("enc", l, 0), h));
    h = relu(conv(level_name("enc", l, 1), h));
    skips.push_back(h);
    h = max_pool2(h);
  }
  h = relu(conv("mid.conv0", h));
  h = relu(conv("mid.conv1", h));
  for (std::size_t l = config_.depth; l-- > 0;) {
    h = relu(conv(level_name("dec", l, 0), upsample_nearest2(h)));
    h = concat({skips[l], h}, 0);
    h = relu(conv(level_name("dec", l, 1), h));
    h = relu(conv(level_name("dec", l, 2), h));
  }
  return sigmoid(conv("head", h));
}

ShadowMatte MatteGenerator::predict(const Image& shadow) const {
  NoGradGuard guard;
  return {forward(to_rgb(shadow).pixels), 0.0};
}

Tensor matte_loss(const Tensor& pred, const Tensor& target, double w_l1, double w_bce) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("matte_loss shapes differ: " + shape_to_string(pred.shape()) + " vs " +
                     shape_to_string(target.shape()));
  }
  constexpr double kClip = 1e-7;
  const Tensor l1 = mean(abs(pred - target));
  const Tensor p = clamp(pred, kClip, 1.0 - kClip);
  const Tensor bce = mean(neg(target * log(p) + rsub(1.0, target) * log(rsub(1.0, p))));
  return l1 * w_l1 + bce * w_bce;
}

Tensor binarize_matte(const Tensor& matte, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("binarization threshold must be in (0, 1), got " + std::to_string(threshold));
  }
  std::vector<double> out(matte.numel());
  auto v = matte.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] >= threshold ? 1.0 : 0.0;
  return Tensor(matte.shape(), std::move(out));
}

}  // namespace mattevit
