#include <cmath>

#include "mattevit/errors.hpp"
#include "mattevit/optim.hpp"

namespace mattevit {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "rmsprop";
}

OptimizerKind parse_optimizer(const std::string& text) {
  if (text == "adam") return OptimizerKind::kAdam;
  if (text == "rmsprop") return OptimizerKind::kRmsprop;
  throw ConfigError("unknown optimizer '" + text + "' (expected adam or rmsprop)");
}

OptimizerState OptimizerState::adam(double lr) {
  OptimizerState s;
  s.kind = OptimizerKind::kAdam;
  s.lr = lr;
  return s;
}

OptimizerState OptimizerState::rmsprop(double lr) {
  OptimizerState s;
  s.kind = OptimizerKind::kRmsprop;
  s.lr = lr;
  return s;
}

namespace {

Tensor& accumulator(std::map<std::string, Tensor>& slots, const std::string& name, const Tensor& param) {
  auto it = slots.find(name);
  if (it == slots.end()) it = slots.emplace(name, Tensor::zeros(param.shape())).first;
  if (it->second.shape() != param.shape()) {
    throw ContractError("optimizer state for '" + name + "' has shape " + shape_to_string(it->second.shape()) +
                        ", parameter has " + shape_to_string(param.shape()));
  }
  return it->second;
}

}  // namespace

void optimizer_step(OptimizerState& state, ParameterSet& params) {
  if (!(state.lr > 0.0)) throw ConfigError("learning rate must be positive");
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) throw ContractError("parameter '" + name + "' has no gradient");
  }
  const std::uint64_t t = state.step + 1;
  if (state.kind == OptimizerKind::kAdam) {
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
    for (auto& [name, p] : params) {
      auto m = accumulator(state.first, name, p).mutable_data();
      auto v = accumulator(state.second, name, p).mutable_data();
      auto g = p.grad();
      auto x = p.mutable_data();
      for (std::size_t i = 0; i < x.size(); ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        x[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
      }
    }
  } else {
    for (auto& [name, p] : params) {
      auto v = accumulator(state.second, name, p).mutable_data();
      auto g = p.grad();
      auto x = p.mutable_data();
      for (std::size_t i = 0; i < x.size(); ++i) {
        v[i] = state.decay * v[i] + (1.0 - state.decay) * g[i] * g[i];
        x[i] -= state.lr * g[i] / (std::sqrt(v[i]) + state.eps);
      }
    }
  }
  state.step = t;
}

}  // namespace mattevit
