#include <map>

#include "mattevit/errors.hpp"
#include "mattevit/pipeline.hpp"

namespace mattevit {

namespace fs = std::filesystem;

namespace {

MetricsRow compare(const std::string& name, const Tensor& pred, const Tensor& gt) {
  MetricsRow row;
  row.image = name;
  row.psnr_db = psnr(pred, gt);
  row.ssim = ssim(pred, gt);
  row.rmse = rmse(pred, gt);
  return row;
}

std::vector<fs::path> images_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  return list_images(dir);
}

std::string size_of(const Image& img) {
  return std::to_string(img.height()) + "x" + std::to_string(img.width());
}

}  // namespace

std::vector<fs::path> infer(const fs::path& checkpoint, const fs::path& input_dir, const fs::path& output_dir,
                            std::optional<GuidanceMode> expected) {
  const RemovalModel rm = load_removal_model(checkpoint);
  const GuidanceMode mode = rm.model.config().guidance;
  if (expected && *expected != mode) {
    throw ConfigError(checkpoint.string() + " uses guidance " + to_string(mode) + ", requested " +
                      to_string(*expected));
  }
  const std::size_t s = rm.model.config().image_size;
  // Everything is checked before the first output is written.
  std::vector<std::pair<fs::path, Image>> inputs;
  for (const auto& path : images_in(input_dir)) {
    Image img = to_rgb(load_image(path));
    if (img.height() != s || img.width() != s) {
      throw ShapeError(path.string() + " is " + size_of(img) + " but the model was trained at " + std::to_string(s) +
                       "x" + std::to_string(s) + "; resize the input to that size first");
    }
    inputs.emplace_back(path, std::move(img));
  }
  std::vector<fs::path> written;
  if (inputs.empty()) return written;
  fs::create_directories(output_dir);
  for (const auto& [path, img] : inputs) {
    const fs::path out = output_dir / (path.stem().string() + ".png");
    save_image(rm.restore(img), out);
    written.push_back(out);
  }
  return written;
}

MetricsReport evaluate(const fs::path& pred_dir, const fs::path& gt_dir) {
  std::map<std::string, fs::path> gts;
  for (const auto& p : images_in(gt_dir)) gts[p.stem().string()] = p;
  std::map<std::string, fs::path> preds;
  for (const auto& p : images_in(pred_dir)) preds[p.stem().string()] = p;

  MetricsReport report;
  for (const auto& [stem, path] : preds) {
    auto it = gts.find(stem);
    if (it == gts.end()) {
      report.problems.push_back(stem + ": no ground truth in " + gt_dir.string());
      continue;
    }
    const Image pred = to_rgb(load_image(path));
    const Image gt = to_rgb(load_image(it->second));
    if (pred.height() != gt.height() || pred.width() != gt.width()) {
      report.problems.push_back(stem + ": prediction is " + size_of(pred) + ", ground truth is " + size_of(gt));
      continue;
    }
    report.rows.push_back(compare(stem, pred.pixels, gt.pixels));
  }
  for (const auto& [stem, path] : gts) {
    if (!preds.count(stem)) report.problems.push_back(stem + ": no prediction in " + pred_dir.string());
  }
  if (report.rows.empty()) {
    throw IoError("no matching prediction/ground-truth images between " + pred_dir.string() + " and " +
                  gt_dir.string());
  }
  return report;
}

MetricsReport evaluate_model(const RemovalModel& model, const std::vector<TrainingPair>& pairs) {
  MetricsReport report;
  for (const auto& p : pairs) {
    report.rows.push_back(compare(p.stem, model.restore(p.shadow).pixels, p.shadow_free.pixels));
  }
  return report;
}

}  // namespace mattevit
