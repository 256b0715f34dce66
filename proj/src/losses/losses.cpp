#include "mattevit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mattevit/errors.hpp"
#include "mattevit/ops.hpp"

namespace mattevit {

void LossWeights::validate() const {
  if (!(lambda_fft >= 0.0)) throw ConfigError("lambda_fft must be nonnegative");
  if (!(charbonnier_epsilon > 0.0)) throw ConfigError("charbonnier_epsilon must be positive");
  if (!(edge_alpha >= 0.0)) throw ConfigError("edge_alpha must be nonnegative");
}

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + " shapes differ: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor edge_weight_map(const Tensor& gt, double alpha) {
  if (gt.rank() != 3 || (gt.dim(0) != 3 && gt.dim(0) != 1)) {
    throw ShapeError("edge weights need a [3,H,W] or [1,H,W] image, got " + shape_to_string(gt.shape()));
  }
  const std::size_t h = gt.dim(1), w = gt.dim(2), plane = h * w;
  auto px = gt.data();
  std::vector<double> gray(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    gray[i] = gt.dim(0) == 1 ? px[i] : 0.299 * px[i] + 0.587 * px[plane + i] + 0.114 * px[2 * plane + i];
  }
  auto at = [&](long y, long x) {
    if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) return 0.0;
    return gray[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  std::vector<double> lap(plane);
  double peak = 0.0;
  for (long y = 0; y < static_cast<long>(h); ++y)
    for (long x = 0; x < static_cast<long>(w); ++x) {
      const double v = at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) - 4.0 * at(y, x);
      lap[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] = std::abs(v);
      peak = std::max(peak, std::abs(v));
    }
  const double scale = std::max(peak, 1e-8);
  for (double& v : lap) v = 1.0 + alpha * v / scale;
  return Tensor({1, h, w}, std::move(lap));
}

Tensor charbonnier_loss(const Tensor& pred, const Tensor& gt, const Tensor& w, double eps) {
  require_same(pred, gt, "charbonnier");
  if (!(eps > 0.0)) throw ConfigError("charbonnier epsilon must be positive");
  const Tensor d = pred - gt;
  return mean(sqrt(w * (d * d) + eps * eps));
}

Tensor fft_loss(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "fft loss");
  const Spectrum a = fft2(pred), b = fft2(gt);
  return mean(complex_abs(a.real - b.real, a.imag - b.imag));
}

Tensor fft_loss_of_difference(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "fft loss");
  const Spectrum s = fft2(pred - gt);
  return mean(complex_abs(s.real, s.imag));
}

LossBreakdown total_loss(const Tensor& pred, const Tensor& gt, const LossWeights& weights) {
  weights.validate();
  const Tensor w = edge_weight_map(gt, weights.edge_alpha);
  const Tensor ch = charbonnier_loss(pred, gt, w, weights.charbonnier_epsilon);
  const Tensor ff = fft_loss(pred, gt);
  return {ch + ff * weights.lambda_fft, ch.item(), ff.item()};
}

std::string loss_csv_header() { return "step,L_char,L_fft,L_total"; }

std::string loss_csv_row(std::size_t step, const LossBreakdown& b) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g", step, b.charbonnier, b.fft, b.total.item());
  return buf;
}

}  // namespace mattevit
