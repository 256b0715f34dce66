#include "mattevit/parameters.hpp"

#include <algorithm>

#include "mattevit/errors.hpp"

namespace mattevit {

void ParameterSet::add(std::string name, Tensor tensor) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

const Tensor& ParameterSet::at(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ContractError("unknown parameter '" + name + "'");
}

Tensor& ParameterSet::at(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).at(name));
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

std::vector<Tensor> ParameterSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(t);
  return out;
}

void ParameterSet::load_values(const ParameterSet& other) {
  for (auto& [name, t] : entries_) {
    if (!other.contains(name)) throw FormatError("missing parameter '" + name + "'");
    const Tensor& src = other.at(name);
    if (src.shape() != t.shape()) {
      throw FormatError("parameter '" + name + "' has shape " + shape_to_string(src.shape()) +
                        ", expected " + shape_to_string(t.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), t.mutable_data().begin());
  }
}

}  // namespace mattevit
