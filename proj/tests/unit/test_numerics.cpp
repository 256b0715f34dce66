#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <unordered_set>

#include "mattevit/errors.hpp"
#include "mattevit/gradcheck.hpp"
#include "mattevit/ops.hpp"
#include "mattevit/random.hpp"
#include "gemm.hpp"

using namespace mattevit;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Direct O(N^2) 2-D DFT of one real h x w slice.
std::vector<std::complex<double>> naive_dft2(std::span<const double> x, std::size_t h, std::size_t w) {
  std::vector<std::complex<double>> out(h * w);
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) {
          const double angle = -2.0 * std::numbers::pi *
                               (static_cast<double>(u * y) / static_cast<double>(h) +
                                static_cast<double>(v * xx) / static_cast<double>(w));
          acc += x[y * w + xx] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
      out[u * w + v] = acc;
    }
  return out;
}

// Zero-padded true convolution written against an explicitly padded buffer.
std::vector<double> naive_depthwise(const Tensor& x, const Tensor& k) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), ks = k.dim(1), r = ks / 2;
  const std::size_t ph = h + 2 * r, pw = w + 2 * r;
  std::vector<double> out(x.numel(), 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::vector<double> padded(ph * pw, 0.0);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) padded[(y + r) * pw + xx + r] = x.data()[(ch * h + y) * w + xx];
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (std::size_t i = 0; i < ks; ++i)
          for (std::size_t j = 0; j < ks; ++j) {
            // flipped kernel index for convolution
            acc += k.data()[(ch * ks + (ks - 1 - i)) * ks + (ks - 1 - j)] * padded[(y + i) * pw + xx + j];
          }
        out[(ch * h + y) * w + xx] = acc;
      }
  }
  return out;
}

}  // namespace

TEST_CASE("elementwise scalar broadcast and identity") {
  Tensor a = Tensor::from({1, 2, 3});
  Tensor m = mul(a, 2.0);
  CHECK(m.shape() == Shape{3});
  CHECK(m[0] == 2.0);
  CHECK(m[1] == 4.0);
  CHECK(m[2] == 6.0);

  Rng rng(1);
  Tensor x = random_normal({3, 4}, rng);
  Tensor y = add(x, Tensor::zeros(x.shape()));
  CHECK(max_abs_diff(x.data(), y.data()) == 0.0);
}

TEST_CASE("backward of sum(a*b) gives b") {
  Rng rng(2);
  Tensor a = random_normal({2, 3}, rng, 1.0, true);
  Tensor b = random_normal({2, 3}, rng, 1.0, true);
  sum(mul(a, b)).backward();
  CHECK(max_abs_diff(a.grad(), b.data()) == 0.0);
  CHECK(max_abs_diff(b.grad(), a.data()) == 0.0);
  Tensor bb = b.detach();
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(t, bb)); }, a) < 1e-6);
}

TEST_CASE("elementwise errors") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4});
  try {
    add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4]") != std::string::npos);
  }
  CHECK_THROWS_AS(div(Tensor::ones({2}), Tensor::from({1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(div(Tensor::ones({2}), 0.0), DomainError);
  CHECK_NOTHROW(div(Tensor::ones({2}), Tensor::from({1.0, 0.0}), 1e-6));
  CHECK_THROWS_AS(sqrt(Tensor::from({-1.0})), DomainError);
  CHECK_THROWS_AS(log(Tensor::from({0.0})), DomainError);
}

TEST_CASE("broadcast matches trailing alignment on random shape pairs") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rank = 1 + rng.index(4);
    Shape out(rank);
    for (auto& d : out) d = 1 + rng.index(4);
    Shape sa = out, sb = out;
    for (auto& d : sa) if (rng.uniform() < 0.3) d = 1;
    for (auto& d : sb) if (rng.uniform() < 0.3) d = 1;
    // drop leading axes
    sa.erase(sa.begin(), sa.begin() + static_cast<long>(rng.index(rank)));
    sb.erase(sb.begin(), sb.begin() + static_cast<long>(rng.index(rank)));
    Tensor a = random_normal(sa, rng);
    Tensor b = random_normal(sb, rng);
    Tensor c = add(a, b);
    const Shape& cs = c.shape();
    // oracle: index each operand by clamping the aligned coordinate
    std::vector<std::size_t> idx(cs.size(), 0);
    for (std::size_t flat = 0; flat < c.numel(); ++flat) {
      std::size_t rem = flat;
      for (std::size_t ax = cs.size(); ax-- > 0;) {
        idx[ax] = rem % cs[ax];
        rem /= cs[ax];
      }
      auto lookup = [&](const Tensor& t) {
        const Shape& s = t.shape();
        std::size_t off = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
          const std::size_t coord = s[i] == 1 ? 0 : idx[cs.size() - s.size() + i];
          off = off * s[i] + coord;
        }
        return t.data()[off];
      };
      REQUIRE(c.data()[flat] == lookup(a) + lookup(b));
    }
  }
  CHECK_THROWS_AS(broadcast_shapes({3, 2}, {3}), ShapeError);
}

TEST_CASE("matmul identities and gradients") {
  Rng rng(4);
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor m = random_normal({3, 5}, rng);
  CHECK(max_abs_diff(matmul(eye, m).data(), m.data()) == 0.0);

  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 1}, {1, 1});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 1});
  CHECK(c[0] == 3.0);
  CHECK(c[1] == 7.0);

  Tensor x = random_normal({4, 5}, rng);
  Tensor y = random_normal({5, 6}, rng);
  Tensor w = random_normal({4, 6}, rng);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(matmul(t, y), w)); }, x) < 1e-3);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(matmul(x, t), w)); }, y) < 1e-3);

  Tensor bx = random_normal({2, 3, 4}, rng);
  Tensor by = random_normal({2, 4, 2}, rng);
  CHECK(gradient_check([&](const Tensor& t) { return sum(pow(matmul(t, by), 2.0)); }, bx) < 1e-3);
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("gemm is bit-identical to the k-ordered sum at any buffer offset") {
  Rng rng(17);
  const std::size_t shapes[][3] = {{1, 8, 4}, {1, 4, 8}, {7, 13, 37}, {5, 3, 17}, {9, 33, 300}, {16, 1, 16}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], k = s[1], n = s[2];
    std::vector<double> a(m * k), b(k * n), c0(m * n);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    for (auto& v : c0) v = rng.normal();
    std::vector<double> expect = c0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = expect[i * n + j];
        for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
        expect[i * n + j] = acc;
      }
    for (std::size_t off = 0; off < 8; ++off) {
      std::vector<double> buf(m * n + off);
      std::copy(c0.begin(), c0.end(), buf.begin() + static_cast<long>(off));
      detail::gemm_accumulate(a.data(), b.data(), buf.data() + off, m, k, n);
      CHECK(std::equal(expect.begin(), expect.end(), buf.begin() + static_cast<long>(off)));
    }
  }
  std::vector<double> t(6);
  const std::vector<double> src{1, 2, 3, 4, 5, 6};
  detail::transpose(src.data(), t.data(), 2, 3);
  CHECK(t == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("depthwise convolution") {
  Rng rng(5);
  Tensor kernel = random_uniform({1, 5, 5}, rng, 0.0, 1.0);
  {
    double s = 0.0;
    for (double v : kernel.data()) s += v;
    kernel = div(kernel, s);
  }
  Tensor constant = Tensor::full({1, 9, 9}, 0.7);
  Tensor low = conv2d_depthwise(constant, kernel);
  for (std::size_t y = 2; y < 7; ++y)
    for (std::size_t x = 2; x < 7; ++x) CHECK(low.data()[y * 9 + x] == doctest::Approx(0.7).epsilon(1e-14));

  Tensor delta = Tensor::zeros({1, 9, 9});
  delta.mutable_data()[4 * 9 + 4] = 1.0;
  Tensor response = conv2d_depthwise(delta, kernel);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(response.data()[(2 + i) * 9 + 2 + j] == kernel.data()[i * 5 + j]);

  Tensor x = random_normal({1, 7, 7}, rng);
  Tensor k3 = random_normal({1, 3, 3}, rng);
  CHECK(max_abs_diff(conv2d_depthwise(x, k3).data(), naive_depthwise(x, k3)) < 1e-9);
  CHECK(max_abs_diff(conv2d_depthwise(x, kernel).data(), naive_depthwise(x, kernel)) < 1e-9);

  Tensor xc = random_normal({3, 6, 5}, rng);
  Tensor kc = random_normal({3, 3, 3}, rng);
  CHECK(max_abs_diff(conv2d_depthwise(xc, kc).data(), naive_depthwise(xc, kc)) < 1e-9);
  CHECK(gradient_check([&](const Tensor& t) { return sum(pow(conv2d_depthwise(t, kc), 2.0)); }, xc) < 1e-3);
  CHECK(gradient_check([&](const Tensor& t) { return sum(pow(conv2d_depthwise(xc, t), 2.0)); }, kc) < 1e-3);

  CHECK_THROWS_AS(conv2d_depthwise(x, Tensor::zeros({1, 4, 4})), ConfigError);
}

TEST_CASE("fft2 against the direct DFT") {
  Tensor c = Tensor::full({4, 8}, 0.5);
  Spectrum s = fft2(c);
  CHECK(s.real[0] == doctest::Approx(0.5 * 32).epsilon(1e-14));
  for (std::size_t i = 1; i < 32; ++i) {
    CHECK(std::abs(s.real[i]) < 1e-12);
    CHECK(std::abs(s.imag[i]) < 1e-12);
  }
  Spectrum z = fft2(Tensor::zeros({8, 8}));
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(z.real[i] == 0.0);
    CHECK(z.imag[i] == 0.0);
  }

  Rng rng(6);
  for (std::size_t h = 1; h <= 16; ++h) {
    for (std::size_t w = 1; w <= 16; ++w) {
      Tensor x = random_normal({h, w}, rng);
      Spectrum fx = fft2(x);
      auto oracle = naive_dft2(x.data(), h, w);
      double worst = 0.0;
      for (std::size_t i = 0; i < oracle.size(); ++i) {
        worst = std::max(worst, std::abs(fx.real[i] - oracle[i].real()));
        worst = std::max(worst, std::abs(fx.imag[i] - oracle[i].imag()));
      }
      INFO("size " << h << "x" << w);
      CHECK(worst < 1e-8);
    }
  }

  Tensor x = random_normal({2, 4, 6}, rng);
  Tensor wr = random_normal({2, 4, 6}, rng);
  Tensor wi = random_normal({2, 4, 6}, rng);
  CHECK(gradient_check(
            [&](const Tensor& t) {
              Spectrum f = fft2(t);
              return add(sum(mul(f.real, wr)), sum(mul(f.imag, wi)));
            },
            x) < 1e-3);
  CHECK(gradient_check(
            [&](const Tensor& t) {
              Spectrum f = fft2(t);
              return mean(complex_abs(f.real, f.imag));
            },
            x) < 1e-3);
}

TEST_CASE("reductions and activations") {
  Tensor sm = softmax(Tensor::zeros({3}), 0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(sm[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(mean(Tensor::ones({4, 4})).item() == 1.0);

  Rng rng(7);
  Tensor x = random_normal({5, 7}, rng, 3.0);
  Tensor rows = sum(softmax(x, 1), {1});
  for (double v : rows.data()) CHECK(std::abs(v - 1.0) < 1e-12);
  Tensor cols = sum(softmax(x, 0), {0});
  for (double v : cols.data()) CHECK(std::abs(v - 1.0) < 1e-12);

  Tensor ln_in = random_normal({2, 8}, rng);
  Tensor lw = random_normal({8}, rng);
  Tensor lb = random_normal({8}, rng);
  Tensor probe = random_normal({2, 8}, rng);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(layer_norm(t, lw, lb), probe)); }, ln_in) < 1e-3);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(layer_norm(ln_in, t, lb), probe)); }, lw) < 1e-3);

  CHECK_THROWS_AS(softmax(x, 2), ShapeError);
  CHECK_THROWS_AS(sum(x, {2}), ShapeError);
  CHECK_THROWS_AS(mean(x, {5}), ShapeError);

  Tensor s = sum(x, {0}, true);
  CHECK(s.shape() == Shape{1, 7});
  Tensor m = mean(x, {1});
  CHECK(m.shape() == Shape{5});

  // mean of a constant is exactly that constant
  CHECK(mean(Tensor::full({13, 7}, 1e-3)).item() == 1e-3);
}

TEST_CASE("every differentiable operation passes gradient_check") {
  Rng rng(8);
  Tensor a = random_uniform({3, 4}, rng, 0.5, 2.0);
  Tensor b = random_uniform({4}, rng, 0.5, 2.0);
  Tensor probe = random_normal({3, 4}, rng);
  auto weighted = [&](const Tensor& t) { return sum(mul(t, probe)); };
  const double tol = 1e-3;

  CHECK(gradient_check([&](const Tensor& t) { return weighted(add(t, b)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(add(a, t)); }, b) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(sub(a, t)); }, b) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(mul(a, t)); }, b) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(div(t, b)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(div(a, t)); }, b) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(pow(t, b)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(pow(a, t)); }, b) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(pow(t, 2.5)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(rsub(1.0, t)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(neg(t)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(sqrt(t)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(abs(sub(t, 1.2))); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(exp(t)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(log(t)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(clamp(t, 0.8, 1.5)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(relu(sub(t, 1.2))); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(sigmoid(t)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(gelu(sub(t, 1.2))); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(softmax(t, 1)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(softmax(t, 0)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(sum(t, {1}), Tensor::from({1, 2, 3}))); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(mean(t, {0}), b)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return weighted(transpose(reshape(t, {4, 3}))); }, a) < tol);
  Tensor perm_probe = random_normal({2, 3, 2}, rng);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(permute(reshape(t, {3, 2, 2}), {2, 0, 1}), perm_probe)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return sum(pow(concat({t, a, t}, 1), 2.0)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return sum(pow(slice(t, 1, 1, 2), 3.0)); }, a) < tol);
  Tensor lin_w = random_normal({4, 2}, rng);
  Tensor lin_b = Tensor::from({0.1, 0.2});
  CHECK(gradient_check([&](const Tensor& t) { return sum(pow(linear(t, lin_w, lin_b), 2.0)); }, a) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return sum(pow(linear(a, t, lin_b), 2.0)); }, lin_w) < tol);

  Tensor img = random_normal({2, 6, 6}, rng);
  Tensor w = random_normal({3, 2, 3, 3}, rng);
  Tensor bias = random_normal({3}, rng);
  Tensor probe_out = random_normal({3, 6, 6}, rng);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(conv2d(t, w, bias), probe_out)); }, img) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(conv2d(img, t, bias), probe_out)); }, w) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(conv2d(img, w, t), probe_out)); }, bias) < tol);
  Tensor pool_probe = random_normal({2, 3, 3}, rng);
  CHECK(gradient_check([&](const Tensor& t) { return sum(mul(max_pool2(t), pool_probe)); }, img) < tol);
  CHECK(gradient_check([&](const Tensor& t) { return sum(pow(upsample_nearest2(t), 2.0)); }, img) < tol);
}

TEST_CASE("gradient_check contract") {
  Rng rng(9);
  Tensor x = random_normal({3, 3}, rng);
  CHECK(gradient_check([](const Tensor& t) { return sum(mul(t, t)); }, x) < 1e-6);
  CHECK_THROWS_AS(gradient_check([](const Tensor& t) { return mul(t, t); }, x), ContractError);
  CHECK_THROWS_AS(mul(x, x).backward(), ContractError);
}

TEST_CASE("shared subexpressions accumulate gradients") {
  Rng rng(10);
  Tensor x = random_normal({4}, rng, 1.0, true);
  Tensor shared = exp(x);
  sum(add(mul(shared, shared), shared)).backward();

  Tensor x1 = x.clone(true);
  Tensor x2 = x.clone(true);
  Tensor x3 = x.clone(true);
  sum(add(mul(exp(x1), exp(x2)), exp(x3))).backward();
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(x.grad()[i] == doctest::Approx(x1.grad()[i] + x2.grad()[i] + x3.grad()[i]).epsilon(1e-14));
  }
}

TEST_CASE("computation record is topologically ordered and replays each op once") {
  Rng rng(11);
  Tensor a = random_normal({3}, rng, 1.0, true);
  Tensor b = random_normal({3}, rng, 1.0, true);
  Tensor c = mul(a, b);
  Tensor d = add(c, a);
  Tensor out = sum(mul(d, c));
  ComputationRecord record = ComputationRecord::trace(out);
  std::unordered_set<const TensorImpl*> seen;
  for (const Tensor& t : record.order()) {
    if (t.node()) {
      for (const Tensor& in : t.node()->inputs) CHECK(seen.count(in.impl()) == 1);
    }
    CHECK(seen.insert(t.impl()).second);
  }
  CHECK(record.operation_count() == 4);

  int calls = 0;
  Tensor x = random_normal({2}, rng, 1.0, true);
  Tensor y = make_result({1}, {x[0] + x[1]}, "probe", {x},
                         [&calls](const GradNode& node, std::span<const double> g) {
                           ++calls;
                           Tensor t = node.inputs[0];
                           t.grad_buffer()[0] += g[0];
                           t.grad_buffer()[1] += g[0];
                         });
  mul(y, y).backward();
  CHECK(calls == 1);
}

TEST_CASE("no-grad guard disables recording") {
  Tensor a = Tensor::ones({2}, true);
  {
    NoGradGuard guard;
    Tensor b = mul(a, a);
    CHECK_FALSE(b.requires_grad());
    CHECK(b.is_leaf());
  }
  CHECK(mul(a, a).requires_grad());
}
