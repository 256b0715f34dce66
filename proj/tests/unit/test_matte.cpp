#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mattevit/errors.hpp"
#include "mattevit/gradcheck.hpp"
#include "mattevit/matte.hpp"
#include "mattevit/ops.hpp"
#include "mattevit/random.hpp"
#include "oracles.hpp"

using namespace mattevit;
namespace fs = std::filesystem;

namespace {

Image lab_from_l(const std::vector<double>& l) {
  std::vector<double> px(3 * l.size(), 0.0);
  std::copy(l.begin(), l.end(), px.begin());
  return Image(Tensor({3, 1, l.size()}, std::move(px)), ColorSpace::kLAB);
}

}  // namespace

TEST_CASE("matte closed forms") {
  const auto m = compute_matte(lab_from_l({50.0, 0.0, 100.0, 30.0}), lab_from_l({100.0, 80.0, 100.0, 20.0}));
  CHECK(m.values[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(m.values[1] == 1.0);
  CHECK(m.values[2] <= 1e-8);
  CHECK(m.values[3] == 0.0);  // brighter shadow pixel clamps to 0
  CHECK(m.epsilon_used == 1e-6);
  CHECK(m.values.shape() == Shape{1, 1, 4});

  const auto pair = synth_shadow_pair(4, 32, 32);
  const auto same = compute_matte(pair.shadow_free, pair.shadow_free);
  const Image lab = rgb_to_lab(pair.shadow_free);
  for (std::size_t i = 0; i < 32 * 32; ++i) {
    const double l = lab.pixels[i];
    CHECK(same.values[i] <= 1e-6 / (l + 1e-6) + 1e-15);
  }
  CHECK_THROWS_AS(compute_matte(Image::zeros(3, 4, 4), Image::zeros(3, 4, 5)), ShapeError);
}

TEST_CASE("matte matches a scalar reimplementation and is monotone") {
  Rng rng(21);
  std::vector<double> ls(1000), lf(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    ls[i] = rng.uniform(0.0, 100.0);
    lf[i] = rng.uniform(0.0, 100.0);
  }
  const auto m = compute_matte(lab_from_l(ls), lab_from_l(lf));
  for (std::size_t i = 0; i < 1000; ++i) {
    CHECK(std::abs(m.values[i] - oracle::matte(ls[i], lf[i])) <= 1e-12);
    CHECK(m.values[i] >= 0.0);
    CHECK(m.values[i] <= 1.0);
  }

  // Darkening the shadow never lowers the matte.
  std::vector<double> darker(ls);
  for (auto& v : darker) v *= rng.uniform(0.0, 1.0);
  const auto md = compute_matte(lab_from_l(darker), lab_from_l(lf));
  for (std::size_t i = 0; i < 1000; ++i) CHECK(md.values[i] >= m.values[i]);

  // The ratio does not depend on the L range convention.
  std::vector<double> ls_unit(ls), lf_unit(lf);
  for (auto& v : ls_unit) v /= 100.0;
  for (auto& v : lf_unit) v /= 100.0;
  const auto mu = compute_matte(lab_from_l(ls_unit), lab_from_l(lf_unit), 1e-8);
  for (std::size_t i = 0; i < 1000; ++i) CHECK(std::abs(mu.values[i] - m.values[i]) <= 1e-9);
}

TEST_CASE("matte dataset build") {
  const fs::path root = fs::temp_directory_path() / "mattevit_matte_build";
  fs::remove_all(root);
  fs::create_directories(root);
  auto report = build_matte_dataset(root, root / "matte");
  CHECK(report.written == 0);
  CHECK(report.problems.empty());

  write_synthetic_dataset(root, 1, 5, 32, 32);
  report = build_matte_dataset(root, root / "matte");
  REQUIRE(report.written == 1);
  const auto stem = list_pairs(root).pairs[0].stem;
  const auto stored = load_matte(root / "matte" / (stem + ".png"));
  const auto direct = compute_matte(load_image(root / "shadow" / (stem + ".png")),
                                    load_image(root / "shadow_free" / (stem + ".png")));
  for (std::size_t i = 0; i < direct.values.numel(); ++i) {
    CHECK(std::abs(stored.values[i] - direct.values[i]) <= 0.5 / 255.0 + 1e-12);
  }

  save_image(Image::zeros(3, 16, 16), root / "shadow" / "odd.png");
  save_image(Image::zeros(3, 16, 20), root / "shadow_free" / "odd.png");
  report = build_matte_dataset(root, root / "matte");
  CHECK(report.written == 1);
  REQUIRE(report.problems.size() == 1);
  CHECK(report.problems[0].find("odd") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("matte generator contract") {
  MatteGenConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 4;
  const MatteGenerator gen(cfg, 1);
  Rng rng(2);
  const Tensor x = random_uniform({3, 8, 12}, rng, 0.0, 1.0);
  const Tensor y = gen.forward(x);
  CHECK(y.shape() == Shape{1, 8, 12});
  for (double v : y.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(gen.forward(random_uniform({3, 10, 12}, rng, 0.0, 1.0)), ShapeError);
  try {
    gen.forward(random_uniform({3, 10, 12}, rng, 0.0, 1.0));
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("multiple of 4") != std::string::npos);
  }

  // Same seed, same weights.
  const MatteGenerator twin(cfg, 1);
  const Tensor y2 = twin.forward(x);
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y[i] == y2[i]);

  MatteGenConfig bad;
  bad.w_l1 = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = MatteGenConfig{};
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("matte generator gradients") {
  MatteGenConfig cfg;
  cfg.depth = 1;
  cfg.base_channels = 2;
  MatteGenerator gen(cfg, 3);
  Rng rng(4);
  // Zero biases would put ReLUs over all-zero windows exactly on the kink.
  for (auto& [name, t] : gen.parameters()) {
    if (name.ends_with(".bias"))
      for (double& v : t.mutable_data()) v = 0.1 * rng.normal();
  }
  const Tensor x = random_uniform({3, 4, 4}, rng, 0.0, 1.0);
  const Tensor target = random_uniform({1, 4, 4}, rng, 0.0, 1.0);
  const double err = gradient_check([&] { return matte_loss(gen.forward(x), target); },
                                    gen.parameters().tensors(), 1e-6);
  CHECK(err < 1e-3);
}

TEST_CASE("matte loss") {
  const Tensor half = Tensor::full({1, 4, 4}, 0.5);
  CHECK(matte_loss(half, half).item() == doctest::Approx(0.3 * std::log(2.0)).epsilon(1e-12));
  CHECK(matte_loss(half, half).item() == doctest::Approx(0.2079).epsilon(1e-3));

  const Tensor bin = Tensor({1, 1, 4}, {0.0, 1.0, 1.0, 0.0});
  CHECK(matte_loss(bin, bin).item() < 1e-6);

  Rng rng(8);
  const Tensor target = random_uniform({1, 4, 4}, rng, 0.0, 1.0);
  const Tensor pred = random_uniform({1, 4, 4}, rng, 0.05, 0.95);
  CHECK(gradient_check([&](const Tensor& p) { return matte_loss(p, target); }, pred) < 1e-3);
  CHECK_THROWS_AS(matte_loss(pred, Tensor::zeros({1, 4, 5})), ShapeError);
}

TEST_CASE("binarize matte") {
  const Tensor zero = Tensor::zeros({1, 3, 3});
  const Tensor zero_mask = binarize_matte(zero);
  for (double v : zero_mask.data()) CHECK(v == 0.0);
  CHECK(binarize_matte(Tensor::full({1, 1, 1}, 0.5)).item() == 1.0);
  CHECK(binarize_matte(Tensor::full({1, 1, 1}, 0.1)).item() == 1.0);
  CHECK(binarize_matte(Tensor::full({1, 1, 1}, 0.0999)).item() == 0.0);
  Rng rng(1);
  const Tensor m = random_uniform({1, 8, 8}, rng, 0.0, 1.0);
  const Tensor once = binarize_matte(m, 0.3);
  const Tensor twice = binarize_matte(once, 0.3);
  for (std::size_t i = 0; i < once.numel(); ++i) CHECK(once[i] == twice[i]);
  CHECK_THROWS_AS(binarize_matte(m, 0.0), ConfigError);
  CHECK_THROWS_AS(binarize_matte(m, 1.0), ConfigError);
}
