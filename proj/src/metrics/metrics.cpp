#include "mattevit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mattevit/errors.hpp"

namespace mattevit {

namespace fs = std::filesystem;

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + " shapes differ: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

double mse(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

std::vector<double> gaussian_taps(std::size_t n) {
  std::vector<double> g(n);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid-mode separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                 const std::vector<double>& gy, const std::vector<double>& gx) {
  const std::size_t oh = h - gy.size() + 1, ow = w - gx.size() + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < gx.size(); ++k) acc += gx[k] * src[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < gy.size(); ++k) acc += gy[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace

double psnr(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "psnr");
  const double m = mse(pred, gt);
  if (m == 0.0) return 100.0;
  return std::min(100.0, 20.0 * std::log10(1.0 / std::sqrt(m)));
}

double ssim(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "ssim");
  if (pred.rank() != 3) throw ShapeError("ssim expects [C,H,W], got " + shape_to_string(pred.shape()));
  const std::size_t c = pred.dim(0), h = pred.dim(1), w = pred.dim(2), plane = h * w;
  const auto gy = gaussian_taps(std::min<std::size_t>(11, h));
  const auto gx = gaussian_taps(std::min<std::size_t>(11, w));
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = pred[ch * plane + i];
      y[i] = gt[ch * plane + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, gy, gx), my = filter_valid(y, h, w, gy, gx);
    const auto sxx = filter_valid(xx, h, w, gy, gx), syy = filter_valid(yy, h, w, gy, gx);
    const auto sxy = filter_valid(xy, h, w, gy, gx);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2);
      acc += num / den;
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(c);
}

double rmse(const Tensor& pred, const Tensor& gt, RmseScale scale) {
  require_same(pred, gt, "rmse");
  const double r = std::sqrt(mse(pred, gt));
  return scale == RmseScale::kEightBit ? 255.0 * r : r;
}

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xe ? 3 : (b0 >> 3) == 0x1e ? 4 : 0;
    char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1f) : len == 3 ? (b0 & 0x0f) : (b0 & 0x07);
    bool ok = len != 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      ok = (b & 0xc0) == 0x80;
      cp = (cp << 6) | (b & 0x3f);
    }
    if (ok) {
      static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
      ok = cp >= kMin[len] && cp <= 0x10ffff && !(cp >= 0xd800 && cp <= 0xdfff);
    }
    if (ok) {
      out.push_back(cp);
      i += len;
    } else {
      out.push_back(U'�');
      ++i;
    }
  }
  return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  const std::u32string x = decode_utf8(a), y = decode_utf8(b);
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

MetricsRow MetricsReport::aggregate() const {
  MetricsRow m;
  m.image = "mean";
  if (rows.empty()) return m;
  double ed = 0.0;
  std::size_t ed_n = 0, img_n = 0;
  for (const auto& r : rows) {
    if (r.has_image_metrics) {
      m.psnr_db += r.psnr_db;
      m.ssim += r.ssim;
      m.rmse += r.rmse;
      ++img_n;
    }
    if (r.edit_distance) {
      ed += *r.edit_distance;
      ++ed_n;
    }
  }
  m.has_image_metrics = img_n > 0;
  if (img_n) {
    const double n = static_cast<double>(img_n);
    m.psnr_db /= n;
    m.ssim /= n;
    m.rmse /= n;
  }
  if (ed_n) m.edit_distance = ed / static_cast<double>(ed_n);
  return m;
}

namespace {

std::string format_row(const MetricsRow& r) {
  char buf[256];
  std::string s = r.image + ",";
  if (r.has_image_metrics) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,", r.psnr_db, r.ssim, r.rmse);
    s += buf;
  } else {
    s += ",,,";
  }
  if (r.edit_distance) {
    std::snprintf(buf, sizeof(buf), "%.10g", *r.edit_distance);
    s += buf;
  }
  return s;
}

}  // namespace

std::string MetricsReport::to_csv() const {
  std::string out = "image,psnr_db,ssim,rmse,edit_distance\n";
  for (const auto& r : rows) out += format_row(r) + "\n";
  out += format_row(aggregate()) + "\n";
  return out;
}

std::string MetricsReport::summary() const {
  const MetricsRow m = aggregate();
  std::ostringstream os;
  os << rows.size() << " item(s)";
  char buf[160];
  if (m.has_image_metrics) {
    std::snprintf(buf, sizeof(buf), ": PSNR %.2f dB, SSIM %.4f, RMSE %.3f", m.psnr_db, m.ssim, m.rmse);
    os << buf;
  }
  if (m.edit_distance) {
    std::snprintf(buf, sizeof(buf), ", mean edit distance %.3f", *m.edit_distance);
    os << buf;
  }
  for (const auto& p : problems) os << "\n  skipped: " << p;
  return os.str();
}

MetricsReport ocr_eval(const fs::path& gt_dir, const fs::path& pred_dir) {
  auto texts = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") out[e.path().stem().string()] = e.path();
    }
    return out;
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto gt = texts(gt_dir), pred = texts(pred_dir);
  MetricsReport report;
  for (const auto& [stem, path] : gt) {
    auto it = pred.find(stem);
    if (it == pred.end()) {
      report.problems.push_back(stem + ": no prediction text");
      continue;
    }
    MetricsRow row;
    row.image = stem;
    row.has_image_metrics = false;
    row.edit_distance = static_cast<double>(edit_distance(slurp(path), slurp(it->second)));
    report.rows.push_back(row);
  }
  for (const auto& [stem, path] : pred) {
    if (!gt.count(stem)) report.problems.push_back(stem + ": no ground-truth text");
  }
  return report;
}

}  // namespace mattevit
