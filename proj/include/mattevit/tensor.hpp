#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mattevit {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor;
struct TensorImpl;

/// One recorded operation: the tensors it consumed and the rule that maps
/// the gradient of its output onto gradients of those inputs.
struct GradNode {
  using BackwardFn =
      std::function<void(const GradNode& node, std::span<const double> grad_out)>;

  std::string op;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass reaches this tensor
  bool requires_grad = false;
  std::shared_ptr<GradNode> node;
};

/// Dense row-major array of 64-bit reals with optional gradient tracking.
///
/// Tensor is a shared handle: copies alias the same storage. Values are
/// treated as immutable once an operation has consumed them; the only
/// in-place mutations are gradient accumulation and optimizer updates on
/// leaf parameters.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor ones(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from(std::initializer_list<double> values);

  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  bool defined() const { return impl_ != nullptr; }

  std::span<const double> data() const { return impl_->data; }
  // Mutable access for leaf initialization and optimizer updates.
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double operator[](std::size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value);
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> grad_buffer();  // allocates zeros on first use
  void accumulate_grad(std::span<const double> g);
  void zero_grad() { impl_->grad.clear(); }

  bool is_leaf() const { return impl_->node == nullptr; }
  const std::shared_ptr<GradNode>& node() const { return impl_->node; }

  /// Copy of the values with no history and no gradient tracking.
  Tensor detach() const;
  /// Deep copy (values only) that optionally tracks gradients as a new leaf.
  Tensor clone(bool requires_grad = false) const;

  /// Reverse-mode pass from this scalar tensor; accumulates into .grad of
  /// every reachable tensor that requires gradients.
  void backward() const;

  TensorImpl* impl() const { return impl_.get(); }
  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// True while gradient recording is enabled on the current thread.
bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an operation result. A GradNode is attached only when recording is
/// enabled and at least one input requires gradients.
Tensor make_result(Shape shape, std::vector<double> data, std::string op,
                   std::vector<Tensor> inputs, GradNode::BackwardFn backward);

/// Executed operations reachable from a root, in topological order (every
/// tensor appears after all of its inputs).
class ComputationRecord {
 public:
  static ComputationRecord trace(const Tensor& root);

  const std::vector<Tensor>& order() const { return order_; }
  std::size_t operation_count() const;

  /// Runs every node's backward rule once, in reverse topological order.
  void replay_backward() const;

 private:
  std::vector<Tensor> order_;
};

}  // namespace mattevit
