#include "mattevit/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "mattevit/errors.hpp"

namespace mattevit {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::ones(const Shape& shape, bool requires_grad) {
  return full(shape, 1.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return Tensor(shape, std::vector<double>(shape_numel(shape), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape()));
  }
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() requires a single-element tensor, got " + shape_to_string(shape()));
  }
  return impl_->data[0];
}

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw ContractError("requires_grad can only be changed on leaf tensors");
  impl_->requires_grad = value;
}

std::span<double> Tensor::grad_buffer() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::accumulate_grad(std::span<const double> g) {
  if (g.size() != numel()) {
    throw ShapeError("gradient of size " + std::to_string(g.size()) + " for tensor " +
                     shape_to_string(shape()));
  }
  auto dst = grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data, false); }

Tensor Tensor::clone(bool requires_grad) const {
  return Tensor(shape(), impl_->data, requires_grad);
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() requires a scalar output, got shape " + shape_to_string(shape()));
  }
  if (!requires_grad()) {
    throw ContractError("backward() called on a tensor that does not require gradients");
  }
  Tensor self = *this;
  self.grad_buffer()[0] += 1.0;
  ComputationRecord::trace(*this).replay_backward();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<double> data, std::string op,
                   std::vector<Tensor> inputs, GradNode::BackwardFn backward) {
  bool track = false;
  if (g_grad_enabled) {
    track = std::any_of(inputs.begin(), inputs.end(),
                        [](const Tensor& t) { return t.requires_grad(); });
  }
  Tensor out(std::move(shape), std::move(data), false);
  if (track) {
    auto node = std::make_shared<GradNode>();
    node->op = std::move(op);
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    out.impl()->requires_grad = true;
    out.impl()->node = std::move(node);
  }
  return out;
}

ComputationRecord ComputationRecord::trace(const Tensor& root) {
  ComputationRecord record;
  std::unordered_set<const TensorImpl*> visited;
  // Iterative post-order DFS; a frame is (tensor, next input index).
  std::vector<std::pair<Tensor, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root.impl());
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    const auto& node = t.node();
    if (node && next < node->inputs.size()) {
      const Tensor& in = node->inputs[next++];
      if (in.requires_grad() && visited.insert(in.impl()).second) {
        stack.emplace_back(in, 0);
      }
      continue;
    }
    record.order_.push_back(t);
    stack.pop_back();
  }
  return record;
}

std::size_t ComputationRecord::operation_count() const {
  return static_cast<std::size_t>(std::count_if(
      order_.begin(), order_.end(), [](const Tensor& t) { return !t.is_leaf(); }));
}

void ComputationRecord::replay_backward() const {
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const auto& node = it->node();
    if (!node || !it->has_grad()) continue;
    node->backward(*node, it->grad());
  }
}

}  // namespace mattevit
