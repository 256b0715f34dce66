#include <algorithm>
#include <map>

#include "mattevit/errors.hpp"
#include "mattevit/image.hpp"

namespace mattevit {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".ppm";
}

std::map<std::string, fs::path> images_by_stem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& p : list_images(dir)) out[p.stem().string()] = p;
  return out;
}

}  // namespace

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

PairListing list_pairs(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " is not a directory");
  const auto shadow = images_by_stem(root / "shadow");
  const auto free = images_by_stem(root / "shadow_free");
  const auto matte = images_by_stem(root / "matte");
  PairListing listing;
  for (const auto& [stem, path] : shadow) {
    auto it = free.find(stem);
    if (it == free.end()) {
      listing.unmatched.push_back(stem + ": no shadow_free image for " + path.string());
      continue;
    }
    PairEntry e{stem, path, it->second, {}};
    if (auto m = matte.find(stem); m != matte.end()) e.matte = m->second;
    listing.pairs.push_back(std::move(e));
  }
  for (const auto& [stem, path] : free) {
    if (!shadow.count(stem)) listing.unmatched.push_back(stem + ": no shadow image for " + path.string());
  }
  return listing;
}

}  // namespace mattevit
