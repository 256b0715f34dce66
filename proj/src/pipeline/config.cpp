#include <fstream>
#include <functional>
#include <map>

#include "mattevit/config.hpp"
#include "mattevit/errors.hpp"

namespace mattevit {

namespace {

using json = nlohmann::json;
using FieldMap = std::map<std::string, std::function<void(const json&)>>;

// Applies each key through its setter; the first unknown key or type
// mismatch becomes a ConfigError naming the key.
void apply(const json& j, const std::string& where, const FieldMap& fields) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown key '" + where + "." + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + where + "." + key + "': " + e.what());
    }
  }
}

template <typename T>
std::function<void(const json&)> set(T& field) {
  return [&field](const json& v) {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("expected a number, got " + v.dump());
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("expected true or false, got " + v.dump());
    } else if constexpr (std::is_integral_v<T>) {
      const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
      if (!ok) throw ConfigError("expected a non-negative integer, got " + v.dump());
    }
    field = v.get<T>();
  };
}

std::function<void(const json&)> set_path(std::filesystem::path& field) {
  return [&field](const json& v) { field = v.get<std::string>(); };
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"patch", c.patch_size},
          {"dim", c.embed_dim},
          {"depth", c.depth},
          {"heads", c.num_heads},
          {"mlp_ratio", c.mlp_ratio},
          {"guidance", to_string(c.guidance)},
          {"hfam", c.hfam_enabled},
          {"hfam_kernel", c.hfam_kernel},
          {"hfam_sigma", c.hfam_sigma},
          {"hfam_trainable_kernel", c.hfam_trainable_kernel},
          {"image_size", c.image_size}};
}

json to_json(const MatteGenConfig& c) {
  return {{"depth", c.depth}, {"base_channels", c.base_channels}, {"w_l1", c.w_l1}, {"w_bce", c.w_bce},
          {"lr", c.lr},       {"batch", c.batch},                 {"epochs", c.epochs}};
}

json to_json(const LossWeights& c) {
  return {{"lambda", c.lambda_fft}, {"epsilon", c.charbonnier_epsilon}, {"edge_alpha", c.edge_alpha}};
}

json to_json(const RunConfig& c) {
  json j = {{"data", c.data.string()},
            {"eval_data", c.eval_data.string()},
            {"out", c.out.string()},
            {"matte_checkpoint", c.matte_checkpoint.string()},
            {"seed", c.seed},
            {"epochs", c.epochs},
            {"batch", c.batch},
            {"steps", c.steps},
            {"lr", c.lr},
            {"checkpoint_every", c.checkpoint_every},
            {"threshold", c.threshold},
            {"matte_steps", c.matte_steps},
            {"log_every", c.log_every},
            {"size", c.model.image_size},
            {"lambdas", c.lambdas}};
  json model = to_json(c.model);
  model.erase("image_size");
  j["model"] = model;
  j["matte"] = to_json(c.matte);
  j["loss"] = to_json(c.loss);
  return j;
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  apply(j, "model",
        {{"patch", set(c.patch_size)},
         {"dim", set(c.embed_dim)},
         {"depth", set(c.depth)},
         {"heads", set(c.num_heads)},
         {"mlp_ratio", set(c.mlp_ratio)},
         {"guidance", [&c](const json& v) { c.guidance = parse_guidance(v.get<std::string>()); }},
         {"hfam", set(c.hfam_enabled)},
         {"hfam_kernel", set(c.hfam_kernel)},
         {"hfam_sigma", set(c.hfam_sigma)},
         {"hfam_trainable_kernel", set(c.hfam_trainable_kernel)},
         {"image_size", set(c.image_size)}});
  return c;
}

MatteGenConfig matte_config_from_json(const json& j, MatteGenConfig c) {
  apply(j, "matte",
        {{"depth", set(c.depth)},
         {"base_channels", set(c.base_channels)},
         {"w_l1", set(c.w_l1)},
         {"w_bce", set(c.w_bce)},
         {"lr", set(c.lr)},
         {"batch", set(c.batch)},
         {"epochs", set(c.epochs)}});
  return c;
}

LossWeights loss_weights_from_json(const json& j, LossWeights c) {
  apply(j, "loss",
        {{"lambda", set(c.lambda_fft)}, {"epsilon", set(c.charbonnier_epsilon)}, {"edge_alpha", set(c.edge_alpha)}});
  return c;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  apply(j, "config",
        {{"data", set_path(c.data)},
         {"eval_data", set_path(c.eval_data)},
         {"out", set_path(c.out)},
         {"matte_checkpoint", set_path(c.matte_checkpoint)},
         {"seed", set(c.seed)},
         {"epochs", set(c.epochs)},
         {"batch", set(c.batch)},
         {"steps", set(c.steps)},
         {"lr", set(c.lr)},
         {"checkpoint_every", set(c.checkpoint_every)},
         {"threshold", set(c.threshold)},
         {"matte_steps", set(c.matte_steps)},
         {"log_every", set(c.log_every)},
         {"size", set(c.model.image_size)},
         {"lambdas", [&c](const json& v) { c.lambdas = v.get<std::vector<double>>(); }},
         {"model", [&c](const json& v) {
            if (v.contains("image_size")) throw ConfigError("set the image size with the top-level 'size' key");
            c.model = model_config_from_json(v, c.model);
          }},
         {"matte", [&c](const json& v) { c.matte = matte_config_from_json(v, c.matte); }},
         {"loss", [&c](const json& v) { c.loss = loss_weights_from_json(v, c.loss); }}});
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void RunConfig::validate() const {
  model.validate();
  matte.validate();
  loss.validate();
  if (batch == 0) throw ConfigError("batch must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be at least 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (lambdas.empty()) throw ConfigError("lambda sweep list is empty");
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw ConfigError("sweep lambdas must be non-negative");
  }
  const std::size_t levels = std::size_t{1} << matte.depth;
  if (model.guidance != GuidanceMode::kNone && model.image_size % levels != 0) {
    throw ConfigError("size " + std::to_string(model.image_size) + " is not divisible by " + std::to_string(levels) +
                      " as the matte generator depth requires");
  }
  for (const auto* p : {&data, &eval_data, &matte_checkpoint}) {
    if (!p->empty() && !std::filesystem::exists(*p)) throw ConfigError("path does not exist: " + p->string());
  }
}

}  // namespace mattevit
