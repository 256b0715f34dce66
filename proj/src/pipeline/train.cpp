#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>

#include "mattevit/errors.hpp"
#include "mattevit/losses.hpp"
#include "mattevit/ops.hpp"
#include "mattevit/optim.hpp"
#include "mattevit/pipeline.hpp"
#include "mattevit/random.hpp"

namespace mattevit {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct LoopState {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  std::size_t batch = 0;  // next batch within the epoch
};

struct LoopSpec {
  std::string name;
  std::size_t samples = 0;
  std::size_t epochs = 0;
  std::size_t batch = 1;
  std::uint64_t steps = 0;
  std::size_t checkpoint_every = 1;
  std::size_t log_every = 0;
  std::uint64_t seed = 0;
  fs::path out;
  std::string csv_header;
  std::function<std::string(const StepRecord&)> csv_row;
};

std::vector<std::size_t> epoch_order(const LoopSpec& spec, std::size_t epoch) {
  std::vector<std::size_t> order(spec.samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, spec.name + "/shuffle/" + std::to_string(epoch)));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

fs::path checkpoint_path(const LoopSpec& spec, std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%010" PRIu64 ".mvck", step);
  return spec.out / (spec.name + buf);
}

// Zero-padded step numbers make name order equal step order.
void prune_checkpoints(const LoopSpec& spec, std::size_t keep) {
  std::vector<fs::path> found;
  for (const auto& e : fs::directory_iterator(spec.out)) {
    const std::string file = e.path().filename().string();
    if (file.rfind(spec.name + "-", 0) == 0 && e.path().extension() == ".mvck") found.push_back(e.path());
  }
  std::sort(found.begin(), found.end());
  for (std::size_t i = 0; i + keep < found.size(); ++i) fs::remove(found[i]);
}

LoopState loop_state_from(const Checkpoint& ckpt) {
  try {
    return {ckpt.meta.at("step").get<std::uint64_t>(), ckpt.meta.at("epoch").get<std::size_t>(),
            ckpt.meta.at("batch").get<std::size_t>()};
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint lacks training counters: ") + e.what());
  }
}

void put_loop_state(Checkpoint& ckpt, const LoopState& s) {
  ckpt.meta["step"] = s.step;
  ckpt.meta["epoch"] = s.epoch;
  ckpt.meta["batch"] = s.batch;
}

TrainResult run_loop(const LoopSpec& spec, LoopState state, bool resumed,
                     const std::function<StepRecord(const std::vector<std::size_t>&)>& step_fn,
                     const std::function<void(const LoopState&, const fs::path&)>& save) {
  TrainResult result;
  fs::create_directories(spec.out);
  const fs::path csv_path = spec.out / (spec.name + "_loss.csv");
  const bool fresh = !resumed || !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
  std::ofstream csv(csv_path, fresh ? std::ios::trunc : std::ios::app);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  if (fresh) csv << spec.csv_header << '\n';

  bool saved = false;
  auto checkpoint = [&] {
    csv.flush();
    const fs::path p = checkpoint_path(spec, state.step);
    save(state, p);
    prune_checkpoints(spec, 2);
    result.checkpoint = p;
    saved = true;
  };
  auto budget_left = [&] { return spec.steps == 0 || state.step < spec.steps; };

  const std::size_t batches = (spec.samples + spec.batch - 1) / spec.batch;
  while (state.epoch < spec.epochs && budget_left()) {
    const auto order = epoch_order(spec, state.epoch);
    while (state.batch < batches && budget_left()) {
      const std::size_t begin = state.batch * spec.batch;
      const std::size_t end = std::min(spec.samples, begin + spec.batch);
      StepRecord rec = step_fn(std::vector<std::size_t>(order.begin() + static_cast<long>(begin),
                                                        order.begin() + static_cast<long>(end)));
      ++state.step;
      ++state.batch;
      rec.step = state.step;
      rec.epoch = state.epoch;
      result.log.push_back(rec);
      csv << spec.csv_row(rec) << '\n';
      saved = false;
      if (spec.log_every != 0 && state.step % spec.log_every == 0) {
        std::fprintf(stderr, "%s step %" PRIu64 " epoch %zu loss %.6g\n", spec.name.c_str(), rec.step, rec.epoch,
                     rec.loss);
      }
    }
    if (state.batch < batches) break;
    ++state.epoch;
    state.batch = 0;
    if (state.epoch % spec.checkpoint_every == 0) checkpoint();
  }
  if (!saved) checkpoint();
  result.step = state.step;
  return result;
}

Checkpoint load_kind(const fs::path& path, const std::string& kind) {
  Checkpoint ckpt = load_checkpoint(path);
  const std::string found = ckpt.meta.value("kind", std::string("unknown"));
  if (found != kind) {
    throw ConfigError(path.string() + " is a " + found + " checkpoint, expected " + kind);
  }
  return ckpt;
}

template <typename F>
auto read_meta(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint metadata: " + e.what());
  }
}

void require_data(const RunConfig& config) {
  config.validate();
  if (config.data.empty()) throw ConfigError("no dataset root configured (data)");
}

std::string matte_csv_row(const StepRecord& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%" PRIu64 ",%.17g", r.step, r.loss);
  return buf;
}

}  // namespace

std::vector<TrainingPair> load_training_pairs(const fs::path& root, std::size_t size) {
  const PairListing listing = list_pairs(root);
  if (listing.pairs.empty()) {
    std::string msg = "no matched shadow/shadow_free pairs under " + root.string();
    if (!listing.unmatched.empty()) msg += " (" + listing.unmatched.front() + ")";
    throw ConfigError(msg);
  }
  auto sized = [size](Image img) {
    return img.height() == size && img.width() == size ? img : resize_bilinear(img, size, size);
  };
  std::vector<TrainingPair> out;
  for (const auto& p : listing.pairs) {
    TrainingPair tp;
    tp.stem = p.stem;
    tp.shadow = sized(to_rgb(load_image(p.shadow)));
    tp.shadow_free = sized(to_rgb(load_image(p.shadow_free)));
    if (!p.matte.empty()) {
      tp.matte = sized(Image(load_matte(p.matte).values, ColorSpace::kGray)).pixels;
    } else {
      tp.matte = compute_matte(tp.shadow, tp.shadow_free).values;
    }
    out.push_back(std::move(tp));
  }
  return out;
}

TrainResult train_matte_generator(const RunConfig& config, const fs::path& resume) {
  require_data(config);
  const auto pairs = load_training_pairs(config.data, config.model.image_size);
  MatteGenerator gen(config.matte, config.seed);
  OptimizerState opt = OptimizerState::rmsprop(config.matte.lr);
  LoopState state;
  if (!resume.empty()) {
    const Checkpoint ckpt = load_kind(resume, "matte_generator");
    const MatteGenConfig saved = read_meta(resume, [&] { return matte_config_from_json(ckpt.meta.at("matte")); });
    if (saved.depth != config.matte.depth || saved.base_channels != config.matte.base_channels) {
      throw ConfigError("matte generator architecture in " + resume.string() + " differs from the config");
    }
    restore_parameters(ckpt, gen.parameters());
    opt = restore_optimizer(ckpt);
    opt.lr = config.matte.lr;
    state = loop_state_from(ckpt);
  }

  LoopSpec spec;
  spec.name = "matte_gen";
  spec.samples = pairs.size();
  spec.epochs = config.matte.epochs;
  spec.batch = config.matte.batch;
  spec.steps = config.matte_steps;
  spec.checkpoint_every = config.checkpoint_every;
  spec.log_every = config.log_every;
  spec.seed = config.seed;
  spec.out = config.out;
  spec.csv_header = "step,loss";
  spec.csv_row = matte_csv_row;

  auto step_fn = [&](const std::vector<std::size_t>& idx) {
    gen.parameters().zero_grad();
    const double scale = 1.0 / static_cast<double>(idx.size());
    double total = 0.0;
    for (std::size_t i : idx) {
      const Tensor loss = matte_loss(gen.forward(pairs[i].shadow.pixels), pairs[i].matte, config.matte.w_l1,
                                     config.matte.w_bce);
      mul(loss, scale).backward();
      total += loss.item();
    }
    optimizer_step(opt, gen.parameters());
    StepRecord rec;
    rec.loss = total * scale;
    return rec;
  };
  auto save = [&](const LoopState& s, const fs::path& path) {
    Checkpoint ckpt;
    ckpt.meta = {{"kind", "matte_generator"},
                 {"matte", to_json(config.matte)},
                 {"size", config.model.image_size},
                 {"seed", config.seed},
                 {"run", to_json(config)}};
    put_loop_state(ckpt, s);
    store_parameters(ckpt, gen.parameters());
    store_optimizer(ckpt, opt);
    save_checkpoint(ckpt, path);
  };
  return run_loop(spec, state, !resume.empty(), step_fn, save);
}

TrainResult train_removal(const RunConfig& config, const fs::path& resume) {
  require_data(config);
  const GuidanceMode mode = config.model.guidance;
  std::optional<Checkpoint> resumed;
  if (!resume.empty()) {
    resumed = load_kind(resume, "removal");
    const ModelConfig saved = read_meta(resume, [&] { return model_config_from_json(resumed->meta.at("model")); });
    if (saved.guidance != mode) {
      throw ConfigError(resume.string() + " was trained with guidance " + to_string(saved.guidance) +
                        ", the config requests " + to_string(mode));
    }
    if (to_json(saved) != to_json(config.model)) {
      throw ConfigError("model configuration in " + resume.string() + " differs from the config");
    }
  }

  std::optional<MatteGenerator> gen;
  if (mode != GuidanceMode::kNone) {
    if (!config.matte_checkpoint.empty()) {
      gen = load_matte_generator(config.matte_checkpoint);
    } else if (resumed && resumed->meta.contains("matte_generator")) {
      gen = MatteGenerator(read_meta(resume, [&] { return matte_config_from_json(resumed->meta.at("matte_generator")); }),
                           0);
      restore_parameters(*resumed, gen->parameters(), "matte_gen/");
    } else {
      throw ConfigError("guidance " + to_string(mode) + " needs a frozen matte generator (matte_checkpoint)");
    }
  }

  const auto pairs = load_training_pairs(config.data, config.model.image_size);
  MatteViT model(config.model, config.seed);
  OptimizerState opt = OptimizerState::adam(config.lr);
  LoopState state;
  if (resumed) {
    restore_parameters(*resumed, model.parameters());
    opt = restore_optimizer(*resumed);
    opt.lr = config.lr;
    state = loop_state_from(*resumed);
  }

  // The generator is frozen and deterministic, so each sample's guidance is
  // computed once.
  const MatteGenerator* gp = gen ? &*gen : nullptr;
  std::vector<Tensor> inputs;
  for (const auto& p : pairs) {
    inputs.push_back(assemble_input(p.shadow, predict_guidance(p.shadow, mode, gp, config.threshold), mode));
  }
  std::vector<std::vector<double>> frozen;
  if (gen) {
    for (const auto& [name, t] : gen->parameters()) frozen.emplace_back(t.data().begin(), t.data().end());
  }

  LoopSpec spec;
  spec.name = "removal";
  spec.samples = pairs.size();
  spec.epochs = config.epochs;
  spec.batch = config.batch;
  spec.steps = config.steps;
  spec.checkpoint_every = config.checkpoint_every;
  spec.log_every = config.log_every;
  spec.seed = config.seed;
  spec.out = config.out;
  spec.csv_header = loss_csv_header();
  spec.csv_row = [](const StepRecord& r) {
    LossBreakdown b;
    b.total = Tensor::scalar(r.loss);
    b.charbonnier = r.charbonnier;
    b.fft = r.fft;
    return loss_csv_row(r.step, b);
  };

  auto step_fn = [&](const std::vector<std::size_t>& idx) {
    model.parameters().zero_grad();
    const double scale = 1.0 / static_cast<double>(idx.size());
    StepRecord rec;
    for (std::size_t i : idx) {
      const LossBreakdown b = total_loss(model.forward(inputs[i]), pairs[i].shadow_free.pixels, config.loss);
      mul(b.total, scale).backward();
      rec.loss += b.total.item();
      rec.charbonnier += b.charbonnier;
      rec.fft += b.fft;
    }
    optimizer_step(opt, model.parameters());
    if (gen) {
      for (const auto& [name, t] : gen->parameters()) {
        if (t.has_grad()) throw ContractError("frozen matte generator parameter '" + name + "' received a gradient");
      }
    }
    rec.loss *= scale;
    rec.charbonnier *= scale;
    rec.fft *= scale;
    return rec;
  };
  auto save = [&](const LoopState& s, const fs::path& path) {
    Checkpoint ckpt;
    ckpt.meta = {{"kind", "removal"},
                 {"model", to_json(config.model)},
                 {"loss", to_json(config.loss)},
                 {"threshold", config.threshold},
                 {"seed", config.seed},
                 {"run", to_json(config)}};
    put_loop_state(ckpt, s);
    store_parameters(ckpt, model.parameters());
    if (gen) {
      ckpt.meta["matte_generator"] = to_json(gen->config());
      store_parameters(ckpt, gen->parameters(), "matte_gen/");
    }
    store_optimizer(ckpt, opt);
    save_checkpoint(ckpt, path);
  };
  TrainResult result = run_loop(spec, state, resumed.has_value(), step_fn, save);

  if (gen) {
    std::size_t k = 0;
    for (const auto& [name, t] : gen->parameters()) {
      if (!std::equal(t.data().begin(), t.data().end(), frozen[k++].begin())) {
        throw ContractError("frozen matte generator parameter '" + name + "' changed during training");
      }
    }
  }
  return result;
}

MatteGenerator load_matte_generator(const fs::path& checkpoint) {
  const Checkpoint ckpt = load_kind(checkpoint, "matte_generator");
  MatteGenerator gen(read_meta(checkpoint, [&] { return matte_config_from_json(ckpt.meta.at("matte")); }), 0);
  restore_parameters(ckpt, gen.parameters());
  return gen;
}

RemovalModel load_removal_model(const fs::path& checkpoint) {
  const Checkpoint ckpt = load_kind(checkpoint, "removal");
  RemovalModel rm;
  rm.model = MatteViT(read_meta(checkpoint, [&] { return model_config_from_json(ckpt.meta.at("model")); }), 0);
  restore_parameters(ckpt, rm.model.parameters());
  rm.threshold = read_meta(checkpoint, [&] { return ckpt.meta.at("threshold").get<double>(); });
  if (ckpt.meta.contains("matte_generator")) {
    rm.generator =
        MatteGenerator(read_meta(checkpoint, [&] { return matte_config_from_json(ckpt.meta.at("matte_generator")); }), 0);
    restore_parameters(ckpt, rm.generator->parameters(), "matte_gen/");
  }
  if (rm.model.config().guidance != GuidanceMode::kNone && !rm.generator) {
    throw FormatError(checkpoint.string() + ": guided model without an embedded matte generator");
  }
  return rm;
}

Image RemovalModel::restore(const Image& shadow) const {
  return model.restore(to_rgb(shadow), generator ? &*generator : nullptr, threshold);
}

}  // namespace mattevit
