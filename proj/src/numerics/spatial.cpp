#include <memory>

#include "mattevit/errors.hpp"
#include "mattevit/ops.hpp"
#include "gemm.hpp"

namespace mattevit {

namespace {

void require_chw(const Tensor& x, const char* op) {
  if (x.rank() != 3) {
    throw ShapeError(std::string(op) + " expects a [C,H,W] tensor, got " + shape_to_string(x.shape()));
  }
}

// Column matrix of shape [Cin*k*k, H*W] for a "same" cross-correlation.
void im2col(const double* x, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
            double* col) {
  const long r = static_cast<long>(k / 2);
  const long lh = static_cast<long>(h), lw = static_cast<long>(w);
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        double* dst = col + ((c * k + i) * k + j) * h * w;
        for (long y = 0; y < lh; ++y) {
          const long sy = y + static_cast<long>(i) - r;
          for (long xx = 0; xx < lw; ++xx) {
            const long sx = xx + static_cast<long>(j) - r;
            dst[y * lw + xx] = (sy >= 0 && sy < lh && sx >= 0 && sx < lw)
                                   ? x[(c * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)]
                                   : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
                double* gx) {
  const long r = static_cast<long>(k / 2);
  const long lh = static_cast<long>(h), lw = static_cast<long>(w);
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double* src = col + ((c * k + i) * k + j) * h * w;
        for (long y = 0; y < lh; ++y) {
          const long sy = y + static_cast<long>(i) - r;
          if (sy < 0 || sy >= lh) continue;
          for (long xx = 0; xx < lw; ++xx) {
            const long sx = xx + static_cast<long>(j) - r;
            if (sx < 0 || sx >= lw) continue;
            gx[(c * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)] += src[y * lw + xx];
          }
        }
      }
    }
  }
}

}  // namespace

// True convolution: an impulse at p produces the kernel centered at p.
Tensor conv2d_depthwise(const Tensor& x, const Tensor& kernel) {
  require_chw(x, "conv2d_depthwise");
  if (kernel.rank() != 3 || kernel.dim(1) != kernel.dim(2)) {
    throw ShapeError("depthwise kernel must be [C,k,k], got " + shape_to_string(kernel.shape()));
  }
  const std::size_t k = kernel.dim(1);
  if (k % 2 == 0) throw ConfigError("depthwise kernel size must be odd, got " + std::to_string(k));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (kernel.dim(0) != c) {
    throw ShapeError("depthwise kernel has " + std::to_string(kernel.dim(0)) + " channels, input has " +
                     std::to_string(c));
  }
  const long r = static_cast<long>(k / 2);
  const long lh = static_cast<long>(h), lw = static_cast<long>(w);
  auto xd = x.data();
  auto kd = kernel.data();
  std::vector<double> out(x.numel(), 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* xc = xd.data() + ch * h * w;
    const double* kc = kd.data() + ch * k * k;
    double* oc = out.data() + ch * h * w;
    for (long y = 0; y < lh; ++y) {
      for (long xx = 0; xx < lw; ++xx) {
        double acc = 0.0;
        for (long i = 0; i < static_cast<long>(k); ++i) {
          const long sy = y - (i - r);
          if (sy < 0 || sy >= lh) continue;
          for (long j = 0; j < static_cast<long>(k); ++j) {
            const long sx = xx - (j - r);
            if (sx < 0 || sx >= lw) continue;
            acc += kc[i * static_cast<long>(k) + j] * xc[sy * lw + sx];
          }
        }
        oc[y * lw + xx] = acc;
      }
    }
  }
  return make_result(
      x.shape(), std::move(out), "conv2d_depthwise", {x, kernel},
      [c, h, w, k](const GradNode& node, std::span<const double> g) {
        Tensor tx = node.inputs[0];
        Tensor tk = node.inputs[1];
        const long r = static_cast<long>(k / 2);
        const long lh = static_cast<long>(h), lw = static_cast<long>(w), lk = static_cast<long>(k);
        auto xd = tx.data();
        auto kd = tk.data();
        std::span<double> gx, gk;
        if (tx.requires_grad()) gx = tx.grad_buffer();
        if (tk.requires_grad()) gk = tk.grad_buffer();
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double* gc = g.data() + ch * h * w;
          const double* xc = xd.data() + ch * h * w;
          const double* kc = kd.data() + ch * k * k;
          for (long y = 0; y < lh; ++y) {
            for (long xx = 0; xx < lw; ++xx) {
              const double go = gc[y * lw + xx];
              if (go == 0.0) continue;
              for (long i = 0; i < lk; ++i) {
                const long sy = y - (i - r);
                if (sy < 0 || sy >= lh) continue;
                for (long j = 0; j < lk; ++j) {
                  const long sx = xx - (j - r);
                  if (sx < 0 || sx >= lw) continue;
                  if (!gx.empty()) gx[ch * h * w + static_cast<std::size_t>(sy * lw + sx)] += go * kc[i * lk + j];
                  if (!gk.empty()) gk[ch * k * k + static_cast<std::size_t>(i * lk + j)] += go * xc[sy * lw + sx];
                }
              }
            }
          }
        }
      });
}

// Cross-correlation with a [Cout,Cin,k,k] weight, as in most deep-learning
// frameworks.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_chw(x, "conv2d");
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d weight must be [Cout,Cin,k,k], got " + shape_to_string(weight.shape()));
  }
  const std::size_t k = weight.dim(2);
  if (k % 2 == 0) throw ConfigError("conv2d kernel size must be odd, got " + std::to_string(k));
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2), cout = weight.dim(0);
  if (weight.dim(1) != cin) {
    throw ShapeError("conv2d weight expects " + std::to_string(weight.dim(1)) +
                     " input channels, got " + std::to_string(cin));
  }
  if (bias.numel() != cout) throw ShapeError("conv2d bias must have Cout elements");
  const std::size_t kk = cin * k * k;
  const std::size_t hw = h * w;
  auto col = std::make_shared<std::vector<double>>(kk * hw);
  im2col(x.data().data(), cin, h, w, k, col->data());
  std::vector<double> out(cout * hw, 0.0);
  detail::gemm_accumulate(weight.data().data(), col->data(), out.data(), cout, kk, hw);
  auto bd = bias.data();
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < hw; ++i) out[o * hw + i] += bd[o];
  return make_result(
      Shape{cout, h, w}, std::move(out), "conv2d", {x, weight, bias},
      [col, cin, h, w, k, cout, kk, hw](const GradNode& node, std::span<const double> g) {
        Tensor tx = node.inputs[0];
        Tensor tw = node.inputs[1];
        Tensor tb = node.inputs[2];
        if (tw.requires_grad()) {
          std::vector<double> col_t(hw * kk);
          detail::transpose(col->data(), col_t.data(), kk, hw);
          detail::gemm_accumulate(g.data(), col_t.data(), tw.grad_buffer().data(), cout, hw, kk);
        }
        if (tb.requires_grad()) {
          auto gb = tb.grad_buffer();
          for (std::size_t o = 0; o < cout; ++o) {
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += g[o * hw + i];
            gb[o] += s;
          }
        }
        if (tx.requires_grad()) {
          std::vector<double> w_t(kk * cout);
          detail::transpose(tw.data().data(), w_t.data(), cout, kk);
          std::vector<double> gcol(kk * hw, 0.0);
          detail::gemm_accumulate(w_t.data(), g.data(), gcol.data(), kk, cout, hw);
          col2im_add(gcol.data(), cin, h, w, k, tx.grad_buffer().data());
        }
      });
}

Tensor max_pool2(const Tensor& x) {
  require_chw(x, "max_pool2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) {
    throw ShapeError("max_pool2 needs even spatial size, got " + shape_to_string(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  auto argmax = std::make_shared<std::vector<std::size_t>>(c * oh * ow);
  std::vector<double> out(c * oh * ow);
  auto xd = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx) {
        std::size_t best = (ch * h + 2 * y) * w + 2 * xx;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (ch * h + 2 * y + dy) * w + 2 * xx + dx;
            if (xd[idx] > xd[best]) best = idx;
          }
        }
        const std::size_t o = (ch * oh + y) * ow + xx;
        (*argmax)[o] = best;
        out[o] = xd[best];
      }
    }
  }
  return make_result(Shape{c, oh, ow}, std::move(out), "max_pool2", {x},
                     [argmax](const GradNode& node, std::span<const double> g) {
                       Tensor t = node.inputs[0];
                       auto gx = t.grad_buffer();
                       for (std::size_t o = 0; o < g.size(); ++o) gx[(*argmax)[o]] += g[o];
                     });
}

Tensor upsample_nearest2(const Tensor& x) {
  require_chw(x, "upsample_nearest2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = 2 * h, ow = 2 * w;
  std::vector<double> out(c * oh * ow);
  auto xd = x.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx)
        out[(ch * oh + y) * ow + xx] = xd[(ch * h + y / 2) * w + xx / 2];
  return make_result(Shape{c, oh, ow}, std::move(out), "upsample_nearest2", {x},
                     [c, h, w](const GradNode& node, std::span<const double> g) {
                       Tensor t = node.inputs[0];
                       auto gx = t.grad_buffer();
                       const std::size_t oh = 2 * h, ow = 2 * w;
                       for (std::size_t ch = 0; ch < c; ++ch)
                         for (std::size_t y = 0; y < oh; ++y)
                           for (std::size_t xx = 0; xx < ow; ++xx)
                             gx[(ch * h + y / 2) * w + xx / 2] += g[(ch * oh + y) * ow + xx];
                     });
}

}  // namespace mattevit
