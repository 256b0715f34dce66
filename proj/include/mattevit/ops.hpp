#pragma once

#include <cstddef>
#include <vector>

#include "mattevit/tensor.hpp"

// Differentiable tensor operations. Every function records a gradient rule
// when gradient recording is enabled and an input requires gradients.
namespace mattevit {

/// Output shape of a trailing-aligned broadcast; throws ShapeError naming
/// both shapes when they are incompatible.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// Elementwise binary operations with broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Throws DomainError when a denominator is exactly zero; pass a nonzero
/// guard to divide by (b + guard) instead.
Tensor div(const Tensor& a, const Tensor& b, double guard = 0.0);
Tensor pow(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor div(const Tensor& a, double b);
Tensor pow(const Tensor& a, double exponent);
Tensor rsub(double a, const Tensor& b);  // a - b

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }
inline Tensor operator/(const Tensor& a, double b) { return div(a, b); }

// Elementwise unary operations.
Tensor neg(const Tensor& x);
Tensor sqrt(const Tensor& x);  // DomainError on negative input
Tensor abs(const Tensor& x);   // subgradient 0 at 0
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);   // DomainError on non-positive input
/// Gradient passes where lo <= x <= hi, zero elsewhere.
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact erf form

// Matrix products.
/// [m,k]@[k,n] or batched [b,m,k]@[b,k,n] with equal leading dimensions.
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[..., in] @ weight[in, out] + bias[out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Shape manipulation.
Tensor reshape(const Tensor& x, const Shape& shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor transpose(const Tensor& x);  // swaps the last two axes
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

// Reductions.
Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim = false);
/// Uses a running mean, so constant inputs reduce to exactly that constant.
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim = false);

Tensor softmax(const Tensor& x, std::size_t axis);
/// Normalizes over the last axis, then applies weight and bias of that size.
Tensor layer_norm(const Tensor& x, const Tensor& weight, const Tensor& bias, double eps = 1e-5);

// Spatial operations on [C,H,W] tensors, zero padded to "same" size.
Tensor conv2d_depthwise(const Tensor& x, const Tensor& kernel);
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor max_pool2(const Tensor& x);
Tensor upsample_nearest2(const Tensor& x);

/// Unnormalized 2-D DFT over the last two axes. Power-of-two sizes use a
/// radix-2 FFT; other sizes fall back to a direct DFT.
struct Spectrum {
  Tensor real;
  Tensor imag;
};
Spectrum fft2(const Tensor& x);
/// |re + i im| elementwise; the gradient is taken as 0 where the magnitude is 0.
Tensor complex_abs(const Tensor& re, const Tensor& im);

}  // namespace mattevit
