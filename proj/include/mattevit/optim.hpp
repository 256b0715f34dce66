#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mattevit/parameters.hpp"
#include "mattevit/tensor.hpp"

namespace mattevit {

enum class OptimizerKind { kAdam, kRmsprop };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& text);

/// Hyperparameters plus per-parameter accumulators keyed by parameter name.
/// Adam keeps both moments; RMSprop only uses `second`. Accumulators are
/// created on the first step with the shape of their parameter.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double decay = 0.99;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> first;
  std::map<std::string, Tensor> second;

  static OptimizerState adam(double lr);
  static OptimizerState rmsprop(double lr);
};

/// One in-place update of every parameter from its accumulated gradient.
/// Adam is bias corrected; RMSprop uses v = decay v + (1 - decay) g^2 and
/// x -= lr g / (sqrt(v) + eps). Throws ContractError naming the first
/// parameter without a gradient, before touching anything.
void optimizer_step(OptimizerState& state, ParameterSet& params);

}  // namespace mattevit
