#include <numeric>

#include "mattevit/errors.hpp"
#include "mattevit/ops.hpp"
#include "gemm.hpp"

namespace mattevit {

namespace {

struct MatmulDims {
  std::size_t batch, m, k, n;
};

MatmulDims matmul_dims(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() == 2 && sb.size() == 2) {
    if (sa[1] != sb[0]) {
      throw ShapeError("matmul inner dimensions differ: " + shape_to_string(sa) + " @ " +
                       shape_to_string(sb));
    }
    return {1, sa[0], sa[1], sb[1]};
  }
  if (sa.size() == 3 && sb.size() == 3) {
    if (sa[0] != sb[0]) {
      throw ShapeError("matmul batch dimensions differ: " + shape_to_string(sa) + " @ " +
                       shape_to_string(sb));
    }
    if (sa[2] != sb[1]) {
      throw ShapeError("matmul inner dimensions differ: " + shape_to_string(sa) + " @ " +
                       shape_to_string(sb));
    }
    return {sa[0], sa[1], sa[2], sb[2]};
  }
  throw ShapeError("matmul expects two rank-2 or two rank-3 tensors, got " + shape_to_string(sa) +
                   " @ " + shape_to_string(sb));
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const MatmulDims d = matmul_dims(a, b);
  const std::size_t m = d.m, k = d.k, n = d.n;
  std::vector<double> out(d.batch * m * n, 0.0);
  for (std::size_t bi = 0; bi < d.batch; ++bi) {
    detail::gemm_accumulate(a.data().data() + bi * m * k, b.data().data() + bi * k * n,
                            out.data() + bi * m * n, m, k, n);
  }
  Shape shape = d.batch == 1 && a.rank() == 2 ? Shape{m, n} : Shape{d.batch, m, n};
  return make_result(std::move(shape), std::move(out), "matmul", {a, b},
                     [d](const GradNode& node, std::span<const double> g) {
                       const std::size_t m = d.m, k = d.k, n = d.n;
                       Tensor ta = node.inputs[0];
                       Tensor tb = node.inputs[1];
                       std::vector<double> tmp;
                       for (std::size_t bi = 0; bi < d.batch; ++bi) {
                         const double* gm = g.data() + bi * m * n;
                         if (ta.requires_grad()) {
                           tmp.resize(n * k);
                           detail::transpose(tb.data().data() + bi * k * n, tmp.data(), k, n);
                           detail::gemm_accumulate(gm, tmp.data(),
                                                   ta.grad_buffer().data() + bi * m * k, m, n, k);
                         }
                         if (tb.requires_grad()) {
                           tmp.resize(k * m);
                           detail::transpose(ta.data().data() + bi * m * k, tmp.data(), m, k);
                           detail::gemm_accumulate(tmp.data(), gm,
                                                   tb.grad_buffer().data() + bi * k * n, k, m, n);
                         }
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2) throw ShapeError("linear weight must be rank 2");
  if (x.rank() == 2) return add(matmul(x, weight), bias);
  const std::size_t in = x.shape().back();
  Shape flat{x.numel() / in, in};
  Shape out_shape = x.shape();
  out_shape.back() = weight.dim(1);
  return reshape(add(matmul(reshape(x, flat), weight), bias), out_shape);
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("cannot reshape " + shape_to_string(x.shape()) + " to " +
                     shape_to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(shape, std::move(out), "reshape", {x},
                     [](const GradNode& node, std::span<const double> g) {
                       Tensor t = node.inputs[0];
                       t.accumulate_grad(g);
                     });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& in = x.shape();
  if (axes.size() != in.size()) {
    throw ShapeError("permute needs " + std::to_string(in.size()) + " axes");
  }
  std::vector<bool> seen(in.size(), false);
  Shape out_shape(in.size());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] >= in.size() || seen[axes[i]]) throw ShapeError("permute axes are not a permutation");
    seen[axes[i]] = true;
    out_shape[i] = in[axes[i]];
  }
  const auto in_strides = strides_of(in);
  // Source offset for every destination element.
  auto map = std::make_shared<std::vector<std::size_t>>(x.numel());
  std::vector<std::size_t> idx(in.size(), 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < x.numel(); ++o) {
    (*map)[o] = src;
    for (std::size_t ax = out_shape.size(); ax-- > 0;) {
      ++idx[ax];
      src += in_strides[axes[ax]];
      if (idx[ax] < out_shape[ax]) break;
      src -= in_strides[axes[ax]] * idx[ax];
      idx[ax] = 0;
    }
  }
  auto xd = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = xd[(*map)[o]];
  return make_result(std::move(out_shape), std::move(out), "permute", {x},
                     [map](const GradNode& node, std::span<const double> g) {
                       Tensor t = node.inputs[0];
                       auto gx = t.grad_buffer();
                       for (std::size_t o = 0; o < g.size(); ++o) gx[(*map)[o]] += g[o];
                     });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose needs rank >= 2");
  std::vector<std::size_t> axes(x.rank());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[x.rank() - 1], axes[x.rank() - 2]);
  return permute(x, axes);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) {
      throw ShapeError("concat shapes differ: " + shape_to_string(first) + " vs " +
                       shape_to_string(s));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  std::vector<double> out(shape_numel(out_shape));
  const std::size_t out_row = out_shape[axis] * inner;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t row = p.dim(axis) * inner;
    auto pd = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pd.begin() + o * row, row, out.begin() + o * out_row + offset);
    }
    offset += row;
  }
  return make_result(std::move(out_shape), std::move(out), "concat", parts,
                     [outer, inner, out_row, axis](const GradNode& node, std::span<const double> g) {
                       std::size_t off = 0;
                       for (const auto& in : node.inputs) {
                         Tensor t = in;
                         const std::size_t row = t.dim(axis) * inner;
                         if (t.requires_grad()) {
                           auto gx = t.grad_buffer();
                           for (std::size_t o = 0; o < outer; ++o) {
                             for (std::size_t i = 0; i < row; ++i) {
                               gx[o * row + i] += g[o * out_row + off + i];
                             }
                           }
                         }
                         off += row;
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || length == 0 || start + length > x.dim(axis)) {
    throw ShapeError("slice [" + std::to_string(start) + ", +" + std::to_string(length) +
                     ") on axis " + std::to_string(axis) + " of " + shape_to_string(x.shape()));
  }
  const Shape& in = x.shape();
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  Shape out_shape = in;
  out_shape[axis] = length;
  const std::size_t in_row = in[axis] * inner;
  const std::size_t out_row = length * inner;
  const std::size_t off = start * inner;
  std::vector<double> out(outer * out_row);
  auto xd = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xd.begin() + o * in_row + off, out_row, out.begin() + o * out_row);
  }
  return make_result(std::move(out_shape), std::move(out), "slice", {x},
                     [outer, in_row, out_row, off](const GradNode& node, std::span<const double> g) {
                       Tensor t = node.inputs[0];
                       auto gx = t.grad_buffer();
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t i = 0; i < out_row; ++i) gx[o * in_row + off + i] += g[o * out_row + i];
                       }
                     });
}

}  // namespace mattevit
