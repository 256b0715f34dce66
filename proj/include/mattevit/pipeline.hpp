#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mattevit/checkpoint.hpp"
#include "mattevit/config.hpp"
#include "mattevit/image.hpp"
#include "mattevit/matte.hpp"
#include "mattevit/metrics.hpp"
#include "mattevit/model.hpp"

namespace mattevit {

// ---- data -----------------------------------------------------------------

struct TrainingPair {
  std::string stem;
  Image shadow;       // sRGB, size x size
  Image shadow_free;  // sRGB, size x size
  Tensor matte;       // [1, size, size]
};

/// Every matched pair under `root`, bilinearly resized to size x size when
/// needed. The matte target is `<root>/matte/<stem>.png` when present and
/// compute_matte on the resized pair otherwise. ConfigError if nothing
/// matches.
std::vector<TrainingPair> load_training_pairs(const std::filesystem::path& root, std::size_t size);

// ---- training -------------------------------------------------------------

struct StepRecord {
  std::uint64_t step = 0;  // 1-based
  std::size_t epoch = 0;   // 0-based
  double loss = 0.0;
  double charbonnier = 0.0;  // removal only
  double fft = 0.0;          // removal only
};

struct TrainResult {
  std::filesystem::path checkpoint;  // last one written
  std::vector<StepRecord> log;       // steps run by this call
  std::uint64_t step = 0;            // global step counter at the end
};

/// RMSprop on matte_loss with full-image samples, shuffled per epoch from
/// the seed. Writes `matte_gen-<step>.mvck` every `checkpoint_every` epochs
/// and at the end (keeping the newest two) and `matte_gen_loss.csv` under
/// config.out. `resume` continues the step, epoch and batch counters and
/// the optimizer state of a previous run.
TrainResult train_matte_generator(const RunConfig& config, const std::filesystem::path& resume = {});

/// Adam on total_loss. Guidance comes from the frozen generator in
/// config.matte_checkpoint (or the one embedded in `resume`); its
/// parameters must never receive a gradient, which is checked after every
/// step. Checkpoints (`removal-<step>.mvck`) embed the generator, so a
/// single file is enough for inference. Logs go to `removal_loss.csv`.
TrainResult train_removal(const RunConfig& config, const std::filesystem::path& resume = {});

// ---- loading trained models -----------------------------------------------

MatteGenerator load_matte_generator(const std::filesystem::path& checkpoint);

struct RemovalModel {
  MatteViT model;
  std::optional<MatteGenerator> generator;
  double threshold = 0.1;

  Image restore(const Image& shadow) const;
};

RemovalModel load_removal_model(const std::filesystem::path& checkpoint);

// ---- inference and evaluation ---------------------------------------------

/// Restores every image in `input_dir` into `<output_dir>/<stem>.png`.
/// Inputs must already have the model's size (ShapeError suggesting a
/// resize otherwise). When `expected` is given it must match the
/// checkpoint's guidance mode.
std::vector<std::filesystem::path> infer(const std::filesystem::path& checkpoint,
                                         const std::filesystem::path& input_dir,
                                         const std::filesystem::path& output_dir,
                                         std::optional<GuidanceMode> expected = std::nullopt);

/// PSNR, SSIM and RMSE for every stem present in both directories.
/// Unmatched or mis-sized files are reported as problems; IoError when no
/// pair matches.
MetricsReport evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

/// The same metrics for a model restoring in-memory pairs.
MetricsReport evaluate_model(const RemovalModel& model, const std::vector<TrainingPair>& pairs);

// ---- experiment harnesses -------------------------------------------------

/// config.matte_checkpoint when set, otherwise trains a generator into
/// `<out>/matte_generator` and returns its checkpoint.
std::filesystem::path ensure_matte_generator(const RunConfig& config);

struct SweepRow {
  double lambda = 0.0;
  MetricsRow metrics;  // aggregate over the evaluation pairs
  std::filesystem::path checkpoint;
  bool selected = false;  // highest PSNR, earliest on ties
};

/// One removal run per lambda in config.lambdas under `<out>/lambda-<l>`,
/// all with the same seed, evaluated on config.eval_data (or config.data).
/// Also writes `<out>/lambda_sweep.csv`.
std::vector<SweepRow> lambda_sweep(const RunConfig& config);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct AblationRow {
  GuidanceMode guidance = GuidanceMode::kMatte;
  bool hfam = true;
  std::size_t parameters = 0;  // trainable scalars of the trained model
  MetricsRow metrics;
  std::filesystem::path checkpoint;
};

/// guidance {none, binary, matte} x HFAM {on, off}, in that order, each a
/// removal run with the shared seed under `<out>/<guidance>-hfam-<on|off>`.
/// Also writes `<out>/ablation.csv`.
std::vector<AblationRow> ablation_matrix(const RunConfig& config);
std::string ablation_csv(const std::vector<AblationRow>& rows);

// ---- gradient audit -------------------------------------------------------

struct GradAuditEntry {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return error < tolerance; }
};

/// Finite-difference check of every differentiable operation on small
/// random inputs (tolerance 1e-3) and of a depth-1 model with the total
/// loss on an 8x8 input (tolerance 1e-2).
std::vector<GradAuditEntry> gradient_audit(std::uint64_t seed = 0);

}  // namespace mattevit
