#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "mattevit/losses.hpp"
#include "mattevit/matte.hpp"
#include "mattevit/model.hpp"

namespace mattevit {

/// Everything one training or evaluation run depends on. The JSON form
/// (see README) uses the key names of the command-line flags; `size`
/// sets model.image_size.
struct RunConfig {
  std::filesystem::path data;              // paired dataset root
  std::filesystem::path eval_data;         // defaults to `data` when empty
  std::filesystem::path out = "runs";
  std::filesystem::path matte_checkpoint;  // frozen generator for guided runs
  std::uint64_t seed = 0;

  // Removal network.
  std::size_t epochs = 100;
  std::size_t batch = 4;
  std::size_t steps = 0;  // step budget, 0 for none
  double lr = 4e-4;
  std::size_t checkpoint_every = 1;  // epochs
  double threshold = 0.1;            // binary-guidance threshold

  // Matte generator; epochs, batch and lr live in `matte`.
  std::size_t matte_steps = 0;

  std::size_t log_every = 0;  // progress lines on stderr, 0 for silent

  ModelConfig model;
  MatteGenConfig matte;
  LossWeights loss;
  std::vector<double> lambdas{0.01, 0.05, 0.1, 0.5};

  /// Numeric ranges, nested configs, and existence of every non-empty
  /// input path. Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const MatteGenConfig& c);
nlohmann::json to_json(const LossWeights& c);
nlohmann::json to_json(const RunConfig& c);

/// Unknown keys and wrongly typed values raise ConfigError. Missing keys
/// keep the values of `base`.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
MatteGenConfig matte_config_from_json(const nlohmann::json& j, MatteGenConfig base = {});
LossWeights loss_weights_from_json(const nlohmann::json& j, LossWeights base = {});
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace mattevit
