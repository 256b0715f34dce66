#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mattevit/optim.hpp"
#include "mattevit/parameters.hpp"
#include "mattevit/tensor.hpp"

namespace mattevit {

/// Little-endian binary file:
///
///   "MVCK"                      4 bytes
///   version                     u32
///   meta length, meta           u64, UTF-8 JSON text
///   tensor count                u64
///   per tensor:
///     name length, name         u32, UTF-8
///     dtype tag                 u8 (1 = IEEE float64)
///     rank, dims                u32, rank x u64
///     values                    prod(dims) x f64
///
/// `meta` carries the configuration snapshot, counters and seed.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  /// nullptr when absent.
  const Tensor* find(const std::string& name) const;
  void add(std::string name, const Tensor& tensor);
};

/// Written to a temporary file and renamed into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// FormatError on a bad magic, a different version or a truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

void store_parameters(Checkpoint& ckpt, const ParameterSet& params, const std::string& prefix = "");
/// Copies `<prefix><name>` into every parameter; FormatError if one is
/// missing or has the wrong shape.
void restore_parameters(const Checkpoint& ckpt, ParameterSet& params, const std::string& prefix = "");

/// Hyperparameters and step go to meta["optimizer"], accumulators to
/// tensors named "optim/m/<param>" and "optim/v/<param>".
void store_optimizer(Checkpoint& ckpt, const OptimizerState& state);
OptimizerState restore_optimizer(const Checkpoint& ckpt);

}  // namespace mattevit
