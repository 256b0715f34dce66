#include "mattevit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mattevit/errors.hpp"

namespace mattevit {

namespace {

double scalar_output(const Tensor& y) {
  if (y.numel() != 1) {
    throw ContractError("gradient_check needs a scalar-valued function, got shape " +
                        shape_to_string(y.shape()));
  }
  return y.item();
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace

double gradient_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step) {
  Tensor probe = x.clone(true);
  Tensor y = f(probe);
  scalar_output(y);
  y.backward();
  std::vector<double> analytic(probe.numel(), 0.0);
  if (probe.has_grad()) std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());

  NoGradGuard no_grad;
  double worst = 0.0;
  std::vector<double> values(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = scalar_output(f(Tensor(x.shape(), values)));
    values[i] = saved - step;
    const double down = scalar_output(f(Tensor(x.shape(), values)));
    values[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * step)));
  }
  return worst;
}

double gradient_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double step) {
  for (auto& p : params) p.zero_grad();
  Tensor y = f();
  scalar_output(y);
  y.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    analytic.emplace_back(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.back().begin());
  }

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = scalar_output(f());
      values[i] = saved - step;
      const double down = scalar_output(f());
      values[i] = saved;
      worst = std::max(worst, relative_error(analytic[pi][i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

}  // namespace mattevit
