#pragma once

#include <functional>
#include <vector>

#include "mattevit/tensor.hpp"

namespace mattevit {

/// Max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|)
/// where numeric is the central difference with the given step. f must be
/// deterministic and return a single-element tensor (ContractError otherwise).
double gradient_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                      double step = 1e-4);

/// Same measure for a closure over parameter tensors that are perturbed in
/// place; each parameter's values are restored afterwards.
double gradient_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                      double step = 1e-4);

}  // namespace mattevit
