#include <cstdio>
#include <fstream>

#include "mattevit/errors.hpp"
#include "mattevit/pipeline.hpp"

namespace mattevit {

namespace fs = std::filesystem;

namespace {

std::vector<TrainingPair> evaluation_pairs(const RunConfig& config) {
  return load_training_pairs(config.eval_data.empty() ? config.data : config.eval_data, config.model.image_size);
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Guided runs share one frozen generator.
RunConfig with_generator(const RunConfig& config, bool needed) {
  RunConfig c = config;
  if (needed) c.matte_checkpoint = ensure_matte_generator(config);
  return c;
}

}  // namespace

fs::path ensure_matte_generator(const RunConfig& config) {
  if (!config.matte_checkpoint.empty()) return config.matte_checkpoint;
  RunConfig c = config;
  c.out = config.out / "matte_generator";
  return train_matte_generator(c).checkpoint;
}

std::vector<SweepRow> lambda_sweep(const RunConfig& config) {
  config.validate();
  if (config.data.empty()) throw ConfigError("no dataset root configured (data)");
  const RunConfig base = with_generator(config, config.model.guidance != GuidanceMode::kNone);
  const auto eval = evaluation_pairs(base);
  std::vector<SweepRow> rows;
  for (double lambda : base.lambdas) {
    RunConfig c = base;
    c.loss.lambda_fft = lambda;
    c.out = base.out / ("lambda-" + number(lambda));
    SweepRow row;
    row.lambda = lambda;
    row.checkpoint = train_removal(c).checkpoint;
    row.metrics = evaluate_model(load_removal_model(row.checkpoint), eval).aggregate();
    rows.push_back(row);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].metrics.psnr_db > rows[best].metrics.psnr_db) best = i;
  }
  rows[best].selected = true;
  write_text(base.out / "lambda_sweep.csv", sweep_csv(rows));
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "lambda,psnr_db,ssim,rmse,selected\n";
  for (const auto& r : rows) {
    s += number(r.lambda) + "," + number(r.metrics.psnr_db) + "," + number(r.metrics.ssim) + "," +
         number(r.metrics.rmse) + "," + (r.selected ? "1" : "0") + "\n";
  }
  return s;
}

std::vector<AblationRow> ablation_matrix(const RunConfig& config) {
  config.validate();
  if (config.data.empty()) throw ConfigError("no dataset root configured (data)");
  const RunConfig base = with_generator(config, true);
  const auto eval = evaluation_pairs(base);
  std::vector<AblationRow> rows;
  for (GuidanceMode g : {GuidanceMode::kNone, GuidanceMode::kBinary, GuidanceMode::kMatte}) {
    for (bool hfam : {true, false}) {
      RunConfig c = base;
      c.model.guidance = g;
      c.model.hfam_enabled = hfam;
      c.out = base.out / (to_string(g) + (hfam ? "-hfam-on" : "-hfam-off"));
      AblationRow row;
      row.guidance = g;
      row.hfam = hfam;
      row.checkpoint = train_removal(c).checkpoint;
      const RemovalModel rm = load_removal_model(row.checkpoint);
      row.parameters = rm.model.parameters().element_count();
      row.metrics = evaluate_model(rm, eval).aggregate();
      rows.push_back(row);
    }
  }
  write_text(base.out / "ablation.csv", ablation_csv(rows));
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string s = "guidance,hfam,parameters,psnr_db,ssim,rmse\n";
  for (const auto& r : rows) {
    s += to_string(r.guidance) + "," + (r.hfam ? "on" : "off") + "," + std::to_string(r.parameters) + "," +
         number(r.metrics.psnr_db) + "," + number(r.metrics.ssim) + "," + number(r.metrics.rmse) + "\n";
  }
  return s;
}

}  // namespace mattevit
