#pragma once

#include <cstddef>
#include <string>

#include "mattevit/tensor.hpp"

namespace mattevit {

struct LossWeights {
  double lambda_fft = 0.1;
  double charbonnier_epsilon = 1e-3;
  double edge_alpha = 1.0;

  void validate() const;
};

/// 1 + alpha * |lap(gray)| / max(max |lap|, 1e-8) with the 5-point Laplacian,
/// zero padded. gt is [3,H,W] sRGB or [1,H,W] gray; the result is [1,H,W].
Tensor edge_weight_map(const Tensor& gt, double alpha);

/// mean(sqrt(w * (pred - gt)^2 + eps^2)); w broadcasts over channels.
Tensor charbonnier_loss(const Tensor& pred, const Tensor& gt, const Tensor& w, double eps = 1e-3);

/// Mean magnitude of F(pred) - F(gt) over channels and frequency bins.
Tensor fft_loss(const Tensor& pred, const Tensor& gt);
/// Same quantity computed as mean |F(pred - gt)|.
Tensor fft_loss_of_difference(const Tensor& pred, const Tensor& gt);

struct LossBreakdown {
  Tensor total;
  double charbonnier = 0.0;
  double fft = 0.0;
};

/// charbonnier + lambda * fft, with the edge weights taken from gt.
LossBreakdown total_loss(const Tensor& pred, const Tensor& gt, const LossWeights& weights = {});

std::string loss_csv_header();  // "step,L_char,L_fft,L_total"
std::string loss_csv_row(std::size_t step, const LossBreakdown& b);

}  // namespace mattevit
