#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mattevit/tensor.hpp"

namespace mattevit {

/// Ordered collection of named trainable tensors. Handles alias the tensors
/// owned by the model, so updates through either are visible to both.
class ParameterSet {
 public:
  void add(std::string name, Tensor tensor);

  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  std::size_t element_count() const;

  void zero_grad();
  std::vector<Tensor> tensors() const;

  /// Overwrites values by name; every name in this set must be present with
  /// a matching shape.
  void load_values(const ParameterSet& other);

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace mattevit
