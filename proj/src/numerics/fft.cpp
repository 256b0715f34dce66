#include <cmath>
#include <complex>
#include <map>
#include <numbers>

#include "mattevit/errors.hpp"
#include "mattevit/ops.hpp"

namespace mattevit {

namespace {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

// exp(-2*pi*i*k/n) for k in [0, n), computed directly per entry.
const std::vector<Complex>& twiddles(std::size_t n) {
  thread_local std::map<std::size_t, std::vector<Complex>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<Complex> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    t[k] = Complex(std::cos(angle), std::sin(angle));
  }
  return cache.emplace(n, std::move(t)).first->second;
}

void fft_radix2(std::vector<Complex>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& tw = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const Complex u = a[i + j];
        const Complex v = a[i + j + len / 2] * tw[j * step];
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

void dft_direct(std::vector<Complex>& a) {
  const std::size_t n = a.size();
  const auto& tw = twiddles(n);
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) acc += a[m] * tw[(k * m) % n];
    out[k] = acc;
  }
  a.swap(out);
}

void transform_1d(std::vector<Complex>& a) {
  if (is_power_of_two(a.size())) {
    fft_radix2(a);
  } else {
    dft_direct(a);
  }
}

// In-place forward transform over the last two axes of every [h,w] slice.
void transform_2d(std::vector<Complex>& data, std::size_t slices, std::size_t h, std::size_t w) {
  std::vector<Complex> line;
  for (std::size_t s = 0; s < slices; ++s) {
    Complex* base = data.data() + s * h * w;
    line.resize(w);
    for (std::size_t y = 0; y < h; ++y) {
      std::copy_n(base + y * w, w, line.begin());
      transform_1d(line);
      std::copy_n(line.begin(), w, base + y * w);
    }
    line.resize(h);
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t y = 0; y < h; ++y) line[y] = base[y * w + x];
      transform_1d(line);
      for (std::size_t y = 0; y < h; ++y) base[y * w + x] = line[y];
    }
  }
}

// For y = F(x) with x real and upstream gradient g = g_re + i g_im, the
// input gradient is Re(F(g_re - i g_im)).
void accumulate_real_grad(Tensor& x, std::span<const double> g_re, std::span<const double> g_im,
                          std::size_t slices, std::size_t h, std::size_t w) {
  std::vector<Complex> buf(x.numel());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = Complex(g_re.empty() ? 0.0 : g_re[i], g_im.empty() ? 0.0 : -g_im[i]);
  }
  transform_2d(buf, slices, h, w);
  auto gx = x.grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) gx[i] += buf[i].real();
}

}  // namespace

Spectrum fft2(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("fft2 needs rank >= 2, got " + shape_to_string(x.shape()));
  const std::size_t h = x.dim(x.rank() - 2);
  const std::size_t w = x.dim(x.rank() - 1);
  const std::size_t slices = x.numel() / (h * w);
  std::vector<Complex> buf(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = Complex(xd[i], 0.0);
  transform_2d(buf, slices, h, w);
  std::vector<double> re(buf.size()), im(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    re[i] = buf[i].real();
    im[i] = buf[i].imag();
  }
  Spectrum out;
  out.real = make_result(x.shape(), std::move(re), "fft2_real", {x},
                         [slices, h, w](const GradNode& node, std::span<const double> g) {
                           Tensor t = node.inputs[0];
                           accumulate_real_grad(t, g, {}, slices, h, w);
                         });
  out.imag = make_result(x.shape(), std::move(im), "fft2_imag", {x},
                         [slices, h, w](const GradNode& node, std::span<const double> g) {
                           Tensor t = node.inputs[0];
                           accumulate_real_grad(t, {}, g, slices, h, w);
                         });
  return out;
}

}  // namespace mattevit
