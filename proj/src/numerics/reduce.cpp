#include <algorithm>
#include <cmath>
#include <memory>

#include "mattevit/errors.hpp"
#include "mattevit/ops.hpp"

namespace mattevit {

namespace {

struct Reduction {
  Shape out_shape;
  std::vector<std::size_t> target;  // output index of every input element
  std::size_t group = 1;            // inputs per output element
};

Reduction plan_reduction(const Shape& in, const std::vector<std::size_t>& axes, bool keepdim) {
  std::vector<bool> reduce(in.size(), false);
  for (std::size_t ax : axes) {
    if (ax >= in.size()) {
      throw ShapeError("reduction axis " + std::to_string(ax) + " out of range for " +
                       shape_to_string(in));
    }
    reduce[ax] = true;
  }
  Reduction r;
  Shape kept(in.size(), 1);
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (reduce[i]) {
      r.group *= in[i];
      if (keepdim) r.out_shape.push_back(1);
    } else {
      kept[i] = in[i];
      r.out_shape.push_back(in[i]);
    }
  }
  if (r.out_shape.empty()) r.out_shape.push_back(1);

  std::vector<std::size_t> out_strides(in.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    if (!reduce[i]) {
      out_strides[i] = stride;
      stride *= kept[i];
    }
  }
  const std::size_t n = shape_numel(in);
  r.target.resize(n);
  std::vector<std::size_t> idx(in.size(), 0);
  std::size_t t = 0;
  for (std::size_t f = 0; f < n; ++f) {
    r.target[f] = t;
    for (std::size_t ax = in.size(); ax-- > 0;) {
      ++idx[ax];
      t += out_strides[ax];
      if (idx[ax] < in[ax]) break;
      t -= out_strides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return r;
}

std::vector<std::size_t> all_axes(const Tensor& x) {
  std::vector<std::size_t> axes(x.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  return axes;
}

}  // namespace

Tensor sum(const Tensor& x) { return sum(x, all_axes(x), false); }

Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim) {
  auto plan = std::make_shared<Reduction>(plan_reduction(x.shape(), axes, keepdim));
  std::vector<double> out(shape_numel(plan->out_shape), 0.0);
  auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) out[plan->target[i]] += xd[i];
  Shape shape = plan->out_shape;
  return make_result(std::move(shape), std::move(out), "sum", {x},
                     [plan](const GradNode& node, std::span<const double> g) {
                       Tensor t = node.inputs[0];
                       auto gx = t.grad_buffer();
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[plan->target[i]];
                     });
}

Tensor mean(const Tensor& x) { return mean(x, all_axes(x), false); }

Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim) {
  auto plan = std::make_shared<Reduction>(plan_reduction(x.shape(), axes, keepdim));
  const std::size_t n_out = shape_numel(plan->out_shape);
  std::vector<double> out(n_out, 0.0);
  std::vector<std::size_t> seen(n_out, 0);
  auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const std::size_t o = plan->target[i];
    out[o] += (xd[i] - out[o]) / static_cast<double>(++seen[o]);
  }
  Shape shape = plan->out_shape;
  return make_result(std::move(shape), std::move(out), "mean", {x},
                     [plan](const GradNode& node, std::span<const double> g) {
                       Tensor t = node.inputs[0];
                       auto gx = t.grad_buffer();
                       const double inv = 1.0 / static_cast<double>(plan->group);
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[plan->target[i]] * inv;
                     });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(x.shape()));
  }
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];

  auto xd = x.data();
  auto y = std::make_shared<std::vector<double>>(xd.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = xd[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xd[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(xd[base + j * inner] - mx);
        (*y)[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) (*y)[base + j * inner] /= total;
    }
  }
  return make_result(s, *y, "softmax", {x},
                     [y, outer, inner, len](const GradNode& node, std::span<const double> g) {
                       Tensor t = node.inputs[0];
                       auto gx = t.grad_buffer();
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t in = 0; in < inner; ++in) {
                           const std::size_t base = o * len * inner + in;
                           double dot = 0.0;
                           for (std::size_t j = 0; j < len; ++j) {
                             dot += g[base + j * inner] * (*y)[base + j * inner];
                           }
                           for (std::size_t j = 0; j < len; ++j) {
                             const std::size_t k = base + j * inner;
                             gx[k] += (*y)[k] * (g[k] - dot);
                           }
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& weight, const Tensor& bias, double eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm of rank-0 tensor");
  const std::size_t d = x.shape().back();
  if (weight.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm affine parameters must have " + std::to_string(d) + " elements");
  }
  const std::size_t rows = x.numel() / d;
  auto xd = x.data();
  auto wd = weight.data();
  auto bd = bias.data();
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * wd[j] + bd[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), "layer_norm", {x, weight, bias},
      [xhat, inv_std, rows, d](const GradNode& node, std::span<const double> g) {
        Tensor tx = node.inputs[0];
        Tensor tw = node.inputs[1];
        Tensor tb = node.inputs[2];
        auto wd = tw.data();
        if (tw.requires_grad()) {
          auto gw = tw.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) gw[j] += g[r * d + j] * (*xhat)[r * d + j];
        }
        if (tb.requires_grad()) {
          auto gb = tb.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
        }
        if (tx.requires_grad()) {
          auto gx = tx.grad_buffer();
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_g = 0.0, mean_gx = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double gh = g[r * d + j] * wd[j];
              mean_g += gh;
              mean_gx += gh * (*xhat)[r * d + j];
            }
            mean_g *= inv_d;
            mean_gx *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const double gh = g[r * d + j] * wd[j];
              gx[r * d + j] += (*inv_std)[r] * (gh - mean_g - (*xhat)[r * d + j] * mean_gx);
            }
          }
        }
      });
}

}  // namespace mattevit
