#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "mattevit/errors.hpp"
#include "mattevit/ops.hpp"

namespace mattevit {

namespace {

// Maps each flat output index of a broadcast to a flat input index.
class BroadcastMap {
 public:
  BroadcastMap(const Shape& in, const Shape& out) {
    const std::size_t n_out = shape_numel(out);
    if (in == out) {
      kind_ = Kind::kIdentity;
      return;
    }
    if (shape_numel(in) == 1) {
      kind_ = Kind::kScalar;
      return;
    }
    kind_ = Kind::kMapped;
    const std::size_t offset = out.size() - in.size();
    std::vector<std::size_t> in_strides(out.size(), 0);
    std::size_t stride = 1;
    for (std::size_t i = in.size(); i-- > 0;) {
      in_strides[i + offset] = in[i] == 1 ? 0 : stride;
      stride *= in[i];
    }
    map_.resize(n_out);
    std::vector<std::size_t> idx(out.size(), 0);
    std::size_t flat_in = 0;
    for (std::size_t o = 0; o < n_out; ++o) {
      map_[o] = flat_in;
      for (std::size_t ax = out.size(); ax-- > 0;) {
        ++idx[ax];
        flat_in += in_strides[ax];
        if (idx[ax] < out[ax]) break;
        flat_in -= in_strides[ax] * idx[ax];
        idx[ax] = 0;
      }
    }
  }

  std::size_t operator()(std::size_t o) const {
    switch (kind_) {
      case Kind::kIdentity: return o;
      case Kind::kScalar: return 0;
      default: return map_[o];
    }
  }

 private:
  enum class Kind { kIdentity, kScalar, kMapped };
  Kind kind_ = Kind::kIdentity;
  std::vector<std::size_t> map_;
};

template <class F, class DA, class DB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  auto ma = std::make_shared<BroadcastMap>(a.shape(), out_shape);
  auto mb = std::make_shared<BroadcastMap>(b.shape(), out_shape);
  const std::size_t n = shape_numel(out_shape);
  std::vector<double> out(n);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[(*ma)(i)], bd[(*mb)(i)]);

  return make_result(
      std::move(out_shape), std::move(out), name, {a, b},
      [ma, mb, da, db](const GradNode& node, std::span<const double> g) {
        Tensor ta = node.inputs[0];
        Tensor tb = node.inputs[1];
        auto ad = ta.data();
        auto bd = tb.data();
        if (ta.requires_grad()) {
          auto ga = ta.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t ia = (*ma)(i);
            ga[ia] += g[i] * da(ad[ia], bd[(*mb)(i)]);
          }
        }
        if (tb.requires_grad()) {
          auto gb = tb.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t ib = (*mb)(i);
            gb[ib] += g[i] * db(ad[(*ma)(i)], bd[ib]);
          }
        }
      });
}

// df receives (x, y) where y = f(x).
template <class F, class DF>
Tensor unary_op(const char* name, const Tensor& x, F f, DF df) {
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
  auto values = std::make_shared<std::vector<double>>(out);
  return make_result(x.shape(), std::move(out), name, {x},
                     [df, values](const GradNode& node, std::span<const double> g) {
                       Tensor t = node.inputs[0];
                       auto xd = t.data();
                       auto gx = t.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gx[i] += g[i] * df(xd[i], (*values)[i]);
                       }
                     });
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::size_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast shapes " + shape_to_string(a) + " and " +
                       shape_to_string(b));
    }
    out[rank - 1 - i] = std::max(da, db);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b, double guard) {
  if (guard == 0.0) {
    for (double v : b.data()) {
      if (v == 0.0) {
        throw DomainError("division by an exact-zero denominator of shape " +
                          shape_to_string(b.shape()) + " without a guard");
      }
    }
  }
  return binary_op(
      "div", a, b, [guard](double x, double y) { return x / (y + guard); },
      [guard](double, double y) { return 1.0 / (y + guard); },
      [guard](double x, double y) {
        const double d = y + guard;
        return -x / (d * d);
      });
}

Tensor pow(const Tensor& a, const Tensor& b) {
  return binary_op(
      "pow", a, b, [](double x, double y) { return std::pow(x, y); },
      [](double x, double y) { return y * std::pow(x, y - 1.0); },
      [](double x, double y) { return x > 0.0 ? std::pow(x, y) * std::log(x) : 0.0; });
}

Tensor add(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor sub(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor div(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
Tensor rsub(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }

Tensor pow(const Tensor& a, double exponent) {
  return unary_op(
      "pow", a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

Tensor neg(const Tensor& x) {
  return unary_op(
      "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
  }
  return unary_op(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& x) {
  return unary_op(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary_op(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw DomainError("clamp bounds out of order");
  return unary_op(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary_op(
      "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      });
}

Tensor complex_abs(const Tensor& re, const Tensor& im) {
  if (re.shape() != im.shape()) {
    throw ShapeError("complex_abs parts differ: " + shape_to_string(re.shape()) + " vs " +
                     shape_to_string(im.shape()));
  }
  auto rd = re.data();
  auto id = im.data();
  std::vector<double> out(rd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::hypot(rd[i], id[i]);
  auto mag = std::make_shared<std::vector<double>>(out);
  return make_result(re.shape(), std::move(out), "complex_abs", {re, im},
                     [mag](const GradNode& node, std::span<const double> g) {
                       for (std::size_t part = 0; part < 2; ++part) {
                         Tensor t = node.inputs[part];
                         if (!t.requires_grad()) continue;
                         auto v = t.data();
                         auto gt = t.grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           const double m = (*mag)[i];
                           if (m > 0.0) gt[i] += g[i] * v[i] / m;
                         }
                       }
                     });
}

}  // namespace mattevit
