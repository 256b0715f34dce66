// Command-line front end. Every subcommand prints results on stdout and
// progress on stderr; failures end with one line `error[<category>]: ...`
// and a nonzero exit code.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "mattevit/errors.hpp"
#include "mattevit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mattevit;

namespace {

// Flags shared by the training-style subcommands. Each one that is given
// overrides the config file field of the same name.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> size;
  std::optional<std::string> guidance;
  bool no_hfam = false;
  std::optional<double> lambda;
  std::optional<double> threshold;
  std::optional<std::string> data;
  std::optional<std::string> eval_data;
  std::optional<std::string> matte_checkpoint;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> steps;
  std::optional<double> lr;
  std::optional<std::size_t> matte_steps;
  std::optional<std::size_t> log_every;
  std::vector<double> lambdas;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "seed for initialization, shuffling and synthetic data");
    app->add_option("--out", out, "output directory");
    app->add_option("--size", size, "training and inference resolution in pixels");
    app->add_option("--guidance", guidance, "none, binary or matte");
    app->add_flag("--no-hfam", no_hfam, "disable the high-frequency amplification module");
    app->add_option("--lambda", lambda, "weight of the frequency loss");
    app->add_option("--threshold", threshold, "binarization threshold for binary guidance");
    app->add_option("--data", data, "paired dataset root (shadow/, shadow_free/)");
    app->add_option("--eval-data", eval_data, "evaluation dataset root (defaults to --data)");
    app->add_option("--matte-checkpoint", matte_checkpoint, "frozen matte generator checkpoint");
    app->add_option("--epochs", epochs);
    app->add_option("--batch", batch);
    app->add_option("--steps", steps, "step budget, 0 for none");
    app->add_option("--lr", lr);
    app->add_option("--matte-steps", matte_steps, "matte generator step budget");
    app->add_option("--log-every", log_every, "progress line every N steps, 0 for silent");
  }

  RunConfig resolve() const {
    RunConfig c;
    c.log_every = 10;
    if (!config.empty()) {
      std::ifstream in(config);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(config + ": " + e.what());
      }
      c = run_config_from_json(j, c);
    }
    if (seed) c.seed = *seed;
    if (out) c.out = *out;
    if (size) c.model.image_size = *size;
    if (guidance) c.model.guidance = parse_guidance(*guidance);
    if (no_hfam) c.model.hfam_enabled = false;
    if (lambda) c.loss.lambda_fft = *lambda;
    if (threshold) c.threshold = *threshold;
    if (data) c.data = *data;
    if (eval_data) c.eval_data = *eval_data;
    if (matte_checkpoint) c.matte_checkpoint = *matte_checkpoint;
    if (epochs) c.epochs = *epochs;
    if (batch) c.batch = *batch;
    if (steps) c.steps = *steps;
    if (lr) c.lr = *lr;
    if (matte_steps) c.matte_steps = *matte_steps;
    if (log_every) c.log_every = *log_every;
    if (!lambdas.empty()) c.lambdas = lambdas;
    c.validate();
    return c;
  }
};

int exit_code(const std::string& category) {
  static const std::map<std::string, int> codes = {{"usage", 2}, {"config", 3}, {"io", 4}, {"format", 5},
                                                   {"shape", 6},  {"domain", 7},   {"contract", 8}};
  auto it = codes.find(category);
  return it == codes.end() ? 1 : it->second;
}

int fail(const std::string& category, std::string message) {
  for (char& ch : message)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::fprintf(stderr, "error[%s]: %s\n", category.c_str(), message.c_str());
  return exit_code(category);
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

void print_problems(const std::vector<std::string>& problems) {
  for (const auto& p : problems) std::fprintf(stderr, "warning: %s\n", p.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document shadow removal with matte-guided vision transformers"};
  app.require_subcommand(1);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "write a synthetic paired dataset");
  std::string synth_out;
  std::size_t synth_count = 10, synth_size = 64;
  std::uint64_t synth_seed = 0;
  SynthOptions synth_opts;
  synth->add_option("--out", synth_out, "dataset root")->required();
  synth->add_option("--count", synth_count, "number of pairs");
  synth->add_option("--size", synth_size, "image side in pixels");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--max-shadow-depth", synth_opts.max_shadow_depth);
  synth->add_option("--penumbra", synth_opts.penumbra);

  // matte-build
  auto* matte_build = app.add_subcommand("matte-build", "compute ground-truth mattes for a paired dataset");
  std::string mb_data, mb_out;
  double mb_eps = 1e-6;
  matte_build->add_option("--data", mb_data, "paired dataset root")->required();
  matte_build->add_option("--out", mb_out, "output directory (default <data>/matte)");
  matte_build->add_option("--epsilon", mb_eps);

  // training and experiment commands
  CommonFlags train_matte_flags, train_removal_flags, sweep_flags, ablation_flags;
  std::string tm_resume, tr_resume;
  auto* train_matte = app.add_subcommand("train-matte", "train the matte generator");
  train_matte_flags.attach(train_matte);
  train_matte->add_option("--resume", tm_resume, "continue from a generator checkpoint");
  auto* train_removal_cmd = app.add_subcommand("train-removal", "train the shadow-removal transformer");
  train_removal_flags.attach(train_removal_cmd);
  train_removal_cmd->add_option("--resume", tr_resume, "continue from a removal checkpoint");
  auto* sweep = app.add_subcommand("sweep-lambda", "train and evaluate one run per frequency-loss weight");
  sweep_flags.attach(sweep);
  sweep->add_option("--lambdas", sweep_flags.lambdas, "comma-separated sweep list")->delimiter(',');
  auto* ablation = app.add_subcommand("ablation", "guidance x HFAM ablation matrix");
  ablation_flags.attach(ablation);

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "restore every image in a directory");
  std::string inf_ckpt, inf_in, inf_out;
  std::optional<std::string> inf_guidance;
  infer_cmd->add_option("--checkpoint", inf_ckpt, "removal checkpoint")->required();
  infer_cmd->add_option("--input", inf_in, "directory of shadowed images")->required();
  infer_cmd->add_option("--out", inf_out, "output directory")->required();
  infer_cmd->add_option("--guidance", inf_guidance, "fail unless the checkpoint uses this guidance mode");

  // eval / ocr-eval
  auto* eval_cmd = app.add_subcommand("eval", "PSNR, SSIM and RMSE between two image directories");
  std::string ev_pred, ev_gt, ev_out;
  eval_cmd->add_option("--pred", ev_pred, "restored images")->required();
  eval_cmd->add_option("--gt", ev_gt, "ground-truth images")->required();
  eval_cmd->add_option("--out", ev_out, "CSV file (default stdout)");
  auto* ocr_cmd = app.add_subcommand("ocr-eval", "edit distance between matching text files");
  std::string oc_pred, oc_gt, oc_out;
  ocr_cmd->add_option("--pred", oc_pred, "recognized text files")->required();
  ocr_cmd->add_option("--gt", oc_gt, "reference text files")->required();
  ocr_cmd->add_option("--out", oc_out, "CSV file (default stdout)");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of every differentiable operation");
  std::uint64_t gc_seed = 0;
  gradcheck->add_option("--seed", gc_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (synth->parsed()) {
      const auto stems = write_synthetic_dataset(synth_out, synth_count, synth_seed, synth_size, synth_size, synth_opts);
      std::printf("wrote %zu pairs to %s\n", stems.size(), synth_out.c_str());
    } else if (matte_build->parsed()) {
      const fs::path out = mb_out.empty() ? fs::path(mb_data) / "matte" : fs::path(mb_out);
      const MatteBuildReport r = build_matte_dataset(mb_data, out, mb_eps);
      print_problems(r.problems);
      std::printf("wrote %zu mattes to %s\n", r.written, out.string().c_str());
    } else if (train_matte->parsed()) {
      const RunConfig c = train_matte_flags.resolve();
      const TrainResult r = train_matte_generator(c, tm_resume);
      std::printf("%s\n", r.checkpoint.string().c_str());
    } else if (train_removal_cmd->parsed()) {
      const RunConfig c = train_removal_flags.resolve();
      const TrainResult r = train_removal(c, tr_resume);
      std::printf("%s\n", r.checkpoint.string().c_str());
    } else if (sweep->parsed()) {
      std::cout << sweep_csv(lambda_sweep(sweep_flags.resolve()));
    } else if (ablation->parsed()) {
      std::cout << ablation_csv(ablation_matrix(ablation_flags.resolve()));
    } else if (infer_cmd->parsed()) {
      std::optional<GuidanceMode> expected;
      if (inf_guidance) expected = parse_guidance(*inf_guidance);
      const auto written = infer(inf_ckpt, inf_in, inf_out, expected);
      std::printf("wrote %zu images to %s\n", written.size(), inf_out.c_str());
    } else if (eval_cmd->parsed()) {
      const MetricsReport r = evaluate(ev_pred, ev_gt);
      print_problems(r.problems);
      emit(r.to_csv(), ev_out);
      std::fprintf(stderr, "%s\n", r.summary().c_str());
    } else if (ocr_cmd->parsed()) {
      const MetricsReport r = ocr_eval(oc_gt, oc_pred);
      print_problems(r.problems);
      emit(r.to_csv(), oc_out);
    } else if (gradcheck->parsed()) {
      bool ok = true;
      for (const auto& e : gradient_audit(gc_seed)) {
        std::printf("%-48s %.3e < %.0e %s\n", e.name.c_str(), e.error, e.tolerance, e.passed() ? "ok" : "FAIL");
        ok = ok && e.passed();
      }
      if (!ok) return fail("contract", "gradient check failed");
    }
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
