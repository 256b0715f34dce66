#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mattevit/tensor.hpp"

namespace mattevit {

/// 20 log10(1 / sqrt(MSE)) for [0,1] data, capped at 100 dB.
double psnr(const Tensor& pred, const Tensor& gt);

/// Mean SSIM over channels with an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03 on unit range, valid windows only. Images smaller
/// than the window use the central part of the window along that axis.
double ssim(const Tensor& pred, const Tensor& gt);

enum class RmseScale { kEightBit, kUnit };
/// sqrt(mean squared diff), times 255 for the 8-bit scale.
double rmse(const Tensor& pred, const Tensor& gt, RmseScale scale = RmseScale::kEightBit);

/// Levenshtein distance over Unicode scalar values of two UTF-8 strings.
/// Malformed bytes decode to U+FFFD.
std::size_t edit_distance(std::string_view a, std::string_view b);
std::u32string decode_utf8(std::string_view text);

struct MetricsRow {
  std::string image;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double rmse = 0.0;
  bool has_image_metrics = true;  // false for text-only rows
  std::optional<double> edit_distance;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<std::string> problems;

  /// Arithmetic mean of each column over the rows that carry it.
  MetricsRow aggregate() const;
  /// `image,psnr_db,ssim,rmse,edit_distance` with a final "mean" row.
  std::string to_csv() const;
  std::string summary() const;
};

/// Edit distance per `<stem>.txt` present in both directories.
MetricsReport ocr_eval(const std::filesystem::path& gt_dir, const std::filesystem::path& pred_dir);

}  // namespace mattevit
