#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <unistd.h>

#include "mattevit/errors.hpp"
#include "mattevit/ops.hpp"
#include "mattevit/pipeline.hpp"
#include "mattevit/random.hpp"

using namespace mattevit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("mattevit_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

bool same_bits(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

bool same_parameters(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a) {
    if (!b.contains(name) || !same_bits(t, b.at(name))) return false;
  }
  return true;
}

bool same_log(const std::vector<StepRecord>& a, const std::vector<StepRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].step != b[i].step || a[i].epoch != b[i].epoch || a[i].loss != b[i].loss ||
        a[i].charbonnier != b[i].charbonnier || a[i].fft != b[i].fft)
      return false;
  }
  return true;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const fs::path& p) {
  const std::string s = read_file(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// A run small enough for unit tests: 16x16 images, one transformer block.
RunConfig tiny_config(const fs::path& data, const fs::path& out) {
  RunConfig c;
  c.data = data;
  c.out = out;
  c.seed = 21;
  c.model.image_size = 16;
  c.model.patch_size = 4;
  c.model.embed_dim = 8;
  c.model.depth = 1;
  c.model.num_heads = 2;
  c.model.mlp_ratio = 2;
  c.model.guidance = GuidanceMode::kNone;
  c.matte.depth = 1;
  c.matte.base_channels = 2;
  c.matte.lr = 1e-3;
  c.matte.batch = 2;
  c.matte.epochs = 2;
  c.epochs = 3;
  c.batch = 2;
  c.lr = 1e-3;
  return c;
}

std::vector<fs::path> checkpoints_in(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".mvck") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("zero gradients leave parameters unchanged") {
  for (auto make : {OptimizerState::adam, OptimizerState::rmsprop}) {
    ParameterSet ps;
    Rng rng(1);
    ps.add("w", random_normal({3, 2}, rng, 1.0, true));
    const Tensor before = ps.at("w").clone();
    OptimizerState opt = make(0.1);
    for (int i = 0; i < 5; ++i) {
      ps.zero_grad();
      ps.at("w").grad_buffer();
      optimizer_step(opt, ps);
    }
    CHECK(same_bits(before, ps.at("w")));
    CHECK(opt.step == 5);
    CHECK(opt.second.at("w").shape() == Shape{3, 2});
  }
}

TEST_CASE("first updates match the closed forms") {
  // After one step the bias-corrected Adam moments are g and g^2, and the
  // RMSprop accumulator is (1 - decay) g^2.
  const std::vector<double> g{0.3, -2.0, 1e-3};
  for (bool adam : {true, false}) {
    ParameterSet ps;
    ps.add("x", Tensor({3}, {1.0, 2.0, -1.0}, true));
    auto buf = ps.at("x").grad_buffer();
    std::copy(g.begin(), g.end(), buf.begin());
    OptimizerState opt = adam ? OptimizerState::adam(0.01) : OptimizerState::rmsprop(0.01);
    optimizer_step(opt, ps);
    const std::vector<double> x0{1.0, 2.0, -1.0};
    for (std::size_t i = 0; i < 3; ++i) {
      const double denom = adam ? std::abs(g[i]) + 1e-8 : std::sqrt(0.01 * g[i] * g[i]) + 1e-8;
      CHECK(ps.at("x")[i] == doctest::Approx(x0[i] - 0.01 * g[i] / denom).epsilon(1e-12));
    }
  }
}

TEST_CASE("adam minimizes x^2") {
  ParameterSet ps;
  ps.add("x", Tensor({1}, {1.0}, true));
  OptimizerState opt = OptimizerState::adam(0.1);
  std::vector<double> path;
  for (int i = 0; i < 200; ++i) {
    ps.zero_grad();
    Tensor x = ps.at("x");
    sum(mul(x, x)).backward();
    optimizer_step(opt, ps);
    path.push_back(x[0]);
  }
  CHECK(std::abs(ps.at("x")[0]) < 1e-3);

  // Same start, same trajectory.
  ParameterSet again;
  again.add("x", Tensor({1}, {1.0}, true));
  OptimizerState opt2 = OptimizerState::adam(0.1);
  for (int i = 0; i < 200; ++i) {
    again.zero_grad();
    Tensor x = again.at("x");
    sum(mul(x, x)).backward();
    optimizer_step(opt2, again);
    REQUIRE(x[0] == path[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("optimizer rejects a missing gradient without updating anything") {
  ParameterSet ps;
  ps.add("a", Tensor({2}, {1.0, 2.0}, true));
  ps.add("b.weight", Tensor({2}, {3.0, 4.0}, true));
  ps.at("a").grad_buffer()[0] = 1.0;
  OptimizerState opt = OptimizerState::adam(0.1);
  try {
    optimizer_step(opt, ps);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("b.weight") != std::string::npos);
  }
  CHECK(ps.at("a")[0] == 1.0);
  CHECK(opt.step == 0);
  CHECK_THROWS_AS(parse_optimizer("sgd"), ConfigError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  TempDir tmp("ckpt");
  Checkpoint ck;
  ck.meta = {{"kind", "test"}, {"seed", std::uint64_t{18446744073709551615ULL}}, {"lr", 4e-4}};
  Rng rng(3);
  ck.add("w", random_normal({2, 3, 4}, rng));
  ck.add("special", Tensor({6}, {-0.0, std::numeric_limits<double>::denorm_min(), std::numeric_limits<double>::infinity(),
                                 std::numeric_limits<double>::quiet_NaN(), 0.1, -1e308}));
  ck.add("scalar", Tensor::scalar(3.5));
  CHECK_THROWS_AS(ck.add("w", Tensor::scalar(1.0)), ContractError);

  const fs::path p = tmp.path / "a.mvck";
  save_checkpoint(ck, p);
  const Checkpoint back = load_checkpoint(p);
  CHECK(back.version == Checkpoint::kVersion);
  CHECK(back.meta == ck.meta);
  REQUIRE(back.tensors.size() == ck.tensors.size());
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    CHECK(back.tensors[i].first == ck.tensors[i].first);
    CHECK(same_bits(back.tensors[i].second, ck.tensors[i].second));
  }
  CHECK(!fs::exists(tmp.path / "a.mvck.tmp"));

  // Layout: magic, then the version as a little-endian u32.
  std::string bytes = read_file(p);
  CHECK(bytes.substr(0, 4) == "MVCK");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);

  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(tmp.path / name, std::ios::binary) << content;
    return tmp.path / name;
  };
  std::string v2 = bytes;
  v2[4] = 2;
  CHECK_THROWS_AS(load_checkpoint(write("v2.mvck", v2)), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(load_checkpoint(write("magic.mvck", bad)), FormatError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(load_checkpoint(write("cut.mvck", bytes.substr(0, cut))), FormatError);
  }
  CHECK_THROWS_AS(load_checkpoint(write("long.mvck", bytes + "x")), FormatError);
  CHECK_THROWS_AS(load_checkpoint(tmp.path / "missing.mvck"), IoError);
}

TEST_CASE("parameters and optimizer state survive a checkpoint") {
  TempDir tmp("ckpt_state");
  ParameterSet ps;
  Rng rng(4);
  ps.add("w", random_normal({3, 3}, rng, 1.0, true));
  ps.add("b", random_normal({3}, rng, 1.0, true));
  OptimizerState opt = OptimizerState::adam(0.01);
  for (int i = 0; i < 3; ++i) {
    ps.zero_grad();
    sum(pow(add(ps.at("w"), ps.at("b")), 2.0)).backward();
    optimizer_step(opt, ps);
  }
  Checkpoint ck;
  store_parameters(ck, ps, "net/");
  store_optimizer(ck, opt);
  save_checkpoint(ck, tmp.path / "s.mvck");
  const Checkpoint back = load_checkpoint(tmp.path / "s.mvck");

  ParameterSet fresh;
  fresh.add("w", Tensor::zeros({3, 3}, true));
  fresh.add("b", Tensor::zeros({3}, true));
  restore_parameters(back, fresh, "net/");
  CHECK(same_parameters(ps, fresh));
  const OptimizerState o2 = restore_optimizer(back);
  CHECK(o2.kind == OptimizerKind::kAdam);
  CHECK(o2.step == 3);
  CHECK(o2.lr == 0.01);
  for (const auto& name : {"w", "b"}) {
    CHECK(same_bits(o2.first.at(name), opt.first.at(name)));
    CHECK(same_bits(o2.second.at(name), opt.second.at(name)));
  }

  ParameterSet wrong;
  wrong.add("w", Tensor::zeros({2, 3}, true));
  CHECK_THROWS_AS(restore_parameters(back, wrong, "net/"), FormatError);
  ParameterSet extra;
  extra.add("c", Tensor::zeros({1}, true));
  CHECK_THROWS_AS(restore_parameters(back, extra, "net/"), FormatError);
}

TEST_CASE("run config json") {
  TempDir tmp("config");
  RunConfig c;
  c.seed = 99;
  c.model.image_size = 32;
  c.model.guidance = GuidanceMode::kBinary;
  c.loss.lambda_fft = 0.05;
  c.lambdas = {0.1};
  const RunConfig back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(to_json(c)["size"] == 32);
  CHECK(to_json(c)["model"]["guidance"] == "binary");

  using nlohmann::json;
  const RunConfig partial = run_config_from_json(json{{"seed", 5}, {"model", {{"hfam", false}}}});
  CHECK(partial.seed == 5);
  CHECK(run_config_from_json(json::parse(R"({"seed": 18446744073709551615})")).seed == 18446744073709551615ULL);
  CHECK(!partial.model.hfam_enabled);
  CHECK(partial.model.embed_dim == ModelConfig{}.embed_dim);

  CHECK_THROWS_AS(run_config_from_json(json{{"sede", 1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json{{"seed", "one"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json{{"seed", -1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json{{"model", {{"guidance", "soft"}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json{{"model", {{"image_size", 8}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::array()), ConfigError);

  std::ofstream(tmp.path / "c.json") << R"({"seed": 7, "lambdas": [0.5], "loss": {"lambda": 0.2}})";
  const RunConfig loaded = load_run_config(tmp.path / "c.json");
  CHECK(loaded.seed == 7);
  CHECK(loaded.lambdas == std::vector<double>{0.5});
  CHECK(loaded.loss.lambda_fft == 0.2);
  std::ofstream(tmp.path / "bad.json") << "{";
  CHECK_THROWS_AS(load_run_config(tmp.path / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(tmp.path / "none.json"), IoError);

  RunConfig v;
  CHECK_NOTHROW(v.validate());
  v.data = tmp.path / "nowhere";
  CHECK_THROWS_AS(v.validate(), ConfigError);
  v = RunConfig{};
  v.lambdas.clear();
  CHECK_THROWS_AS(v.validate(), ConfigError);
  v = RunConfig{};
  v.model.image_size = 24;  // patch 4 divides it, the 4-level generator does not
  CHECK_THROWS_AS(v.validate(), ConfigError);
  v.model.guidance = GuidanceMode::kNone;
  CHECK_NOTHROW(v.validate());
}

TEST_CASE("training pairs are resized and carry a matte") {
  TempDir tmp("pairs");
  write_synthetic_dataset(tmp.path / "d", 2, 5, 24, 24);
  const auto pairs = load_training_pairs(tmp.path / "d", 16);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].stem == "synth_0000");
  CHECK(pairs[0].shadow.pixels.shape() == Shape{3, 16, 16});
  CHECK(pairs[0].matte.shape() == Shape{1, 16, 16});
  CHECK(same_bits(pairs[0].matte, compute_matte(pairs[0].shadow, pairs[0].shadow_free).values));

  build_matte_dataset(tmp.path / "d", tmp.path / "d" / "matte");
  const auto with_files = load_training_pairs(tmp.path / "d", 24);
  CHECK(same_bits(with_files[1].matte, load_matte(tmp.path / "d" / "matte" / "synth_0001.png").values));

  fs::create_directories(tmp.path / "empty" / "shadow");
  CHECK_THROWS_AS(load_training_pairs(tmp.path / "empty", 16), ConfigError);
}

TEST_CASE("matte generator training") {
  TempDir tmp("train_matte");
  write_synthetic_dataset(tmp.path / "d", 3, 8, 16, 16);
  RunConfig c = tiny_config(tmp.path / "d", tmp.path / "out");

  SUBCASE("zero epochs saves the initial weights") {
    c.matte.epochs = 0;
    const TrainResult r = train_matte_generator(c);
    CHECK(r.log.empty());
    CHECK(r.step == 0);
    CHECK(same_parameters(load_matte_generator(r.checkpoint).parameters(), MatteGenerator(c.matte, c.seed).parameters()));
    CHECK(count_lines(c.out / "matte_gen_loss.csv") == 1);
  }

  SUBCASE("deterministic, logged, and resumable") {
    const TrainResult a = train_matte_generator(c);
    CHECK(a.log.size() == 4);  // 2 epochs of 2 batches
    CHECK(a.log.back().step == 4);
    CHECK(a.log.back().epoch == 1);
    CHECK(count_lines(c.out / "matte_gen_loss.csv") == 5);

    RunConfig c2 = c;
    c2.out = tmp.path / "out2";
    const TrainResult b = train_matte_generator(c2);
    CHECK(same_log(a.log, b.log));
    CHECK(same_parameters(load_matte_generator(a.checkpoint).parameters(),
                          load_matte_generator(b.checkpoint).parameters()));

    RunConfig half = c;
    half.out = tmp.path / "half";
    half.matte_steps = 3;  // stops in the middle of the second epoch
    const TrainResult h = train_matte_generator(half);
    CHECK(h.step == 3);
    RunConfig rest = c;
    rest.out = tmp.path / "half";
    const TrainResult r = train_matte_generator(rest, h.checkpoint);
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].step == 4);
    CHECK(r.log[0].loss == a.log[3].loss);
    CHECK(same_parameters(load_matte_generator(r.checkpoint).parameters(),
                          load_matte_generator(a.checkpoint).parameters()));
    CHECK(count_lines(rest.out / "matte_gen_loss.csv") == 5);

    RunConfig other = c;
    other.matte.base_channels = 3;
    CHECK_THROWS_AS(train_matte_generator(other, a.checkpoint), ConfigError);
  }
}

TEST_CASE("removal training on a single pair drives the loss down") {
  TempDir tmp("overfit");
  write_synthetic_dataset(tmp.path / "d", 1, 2, 16, 16);
  RunConfig c = tiny_config(tmp.path / "d", tmp.path / "out");
  c.model.embed_dim = 16;
  c.epochs = 1000;
  c.steps = 400;
  c.checkpoint_every = 1000;
  const TrainResult r = train_removal(c);
  REQUIRE(r.log.size() == 400);
  CHECK(r.log.back().loss < 0.1 * r.log.front().loss);
  CHECK(checkpoints_in(c.out).size() == 1);
}

TEST_CASE("removal training contracts") {
  TempDir tmp("removal");
  write_synthetic_dataset(tmp.path / "d", 3, 9, 16, 16);
  RunConfig c = tiny_config(tmp.path / "d", tmp.path / "out");

  SUBCASE("guidance none needs no generator; checkpoints rotate") {
    const TrainResult r = train_removal(c);
    CHECK(r.log.size() == 6);
    const auto ckpts = checkpoints_in(c.out);
    REQUIRE(ckpts.size() == 2);
    CHECK(ckpts.back() == r.checkpoint);
    CHECK(ckpts.front().filename() == "removal-0000000004.mvck");
    CHECK(count_lines(c.out / "removal_loss.csv") == 7);
    const Checkpoint ck = load_checkpoint(r.checkpoint);
    CHECK(ck.meta["step"] == 6);
    CHECK(ck.meta["epoch"] == 3);
    CHECK(!ck.meta.contains("matte_generator"));
    for (const auto& rec : r.log) CHECK(std::abs(rec.loss - (rec.charbonnier + c.loss.lambda_fft * rec.fft)) < 1e-12);
  }

  SUBCASE("guided training keeps the generator frozen") {
    RunConfig mc = c;
    mc.out = tmp.path / "gen";
    const fs::path gen_ckpt = train_matte_generator(mc).checkpoint;
    const MatteGenerator gen = load_matte_generator(gen_ckpt);

    c.model.guidance = GuidanceMode::kMatte;
    CHECK_THROWS_AS(train_removal(c), ConfigError);
    c.matte_checkpoint = gen_ckpt;
    const TrainResult r = train_removal(c);
    const RemovalModel rm = load_removal_model(r.checkpoint);
    REQUIRE(rm.generator.has_value());
    CHECK(same_parameters(rm.generator->parameters(), gen.parameters()));
    CHECK(same_parameters(load_matte_generator(gen_ckpt).parameters(), gen.parameters()));

    // A removal checkpoint is not a generator checkpoint.
    RunConfig wrong = c;
    wrong.matte_checkpoint = r.checkpoint;
    CHECK_THROWS_AS(train_removal(wrong), ConfigError);

    // Resuming needs the same guidance mode; the embedded generator is used.
    RunConfig none = c;
    none.model.guidance = GuidanceMode::kNone;
    CHECK_THROWS_AS(train_removal(none, r.checkpoint), ConfigError);
    RunConfig more = c;
    more.matte_checkpoint.clear();
    more.epochs = 4;
    const TrainResult r2 = train_removal(more, r.checkpoint);
    REQUIRE(r2.log.size() == 2);
    CHECK(r2.log.front().step == 7);
  }

  SUBCASE("same seed, same curve; different seed, different curve") {
    const TrainResult a = train_removal(c);
    RunConfig c2 = c;
    c2.out = tmp.path / "out2";
    CHECK(same_log(a.log, train_removal(c2).log));
    c2.seed = 22;
    c2.out = tmp.path / "out3";
    CHECK(!same_log(a.log, train_removal(c2).log));
  }

  SUBCASE("uninterrupted and resumed runs agree") {
    c.steps = 5;
    const TrainResult full = train_removal(c);
    RunConfig part = c;
    part.out = tmp.path / "part";
    part.steps = 2;
    const TrainResult first = train_removal(part);
    part.steps = 5;
    const TrainResult second = train_removal(part, first.checkpoint);
    REQUIRE(second.log.size() == 3);
    CHECK(second.log.front().step == 3);
    std::vector<StepRecord> joined = first.log;
    joined.insert(joined.end(), second.log.begin(), second.log.end());
    CHECK(same_log(full.log, joined));
    CHECK(same_parameters(load_removal_model(full.checkpoint).model.parameters(),
                          load_removal_model(second.checkpoint).model.parameters()));
  }
}

TEST_CASE("inference") {
  TempDir tmp("infer");
  write_synthetic_dataset(tmp.path / "d", 2, 4, 16, 16);
  RunConfig c = tiny_config(tmp.path / "d", tmp.path / "out");
  const fs::path ckpt = train_removal(c).checkpoint;

  const auto a = infer(ckpt, tmp.path / "d" / "shadow", tmp.path / "pred_a");
  const auto b = infer(ckpt, tmp.path / "d" / "shadow", tmp.path / "pred_b", GuidanceMode::kNone);
  REQUIRE(a.size() == 2);
  CHECK(a[0].filename() == "synth_0000.png");
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(read_file(a[i]) == read_file(b[i]));

  const RemovalModel rm = load_removal_model(ckpt);
  const Image restored = rm.restore(load_image(tmp.path / "d" / "shadow" / "synth_0001.png"));
  CHECK(restored.within_range());
  CHECK(same_bits(load_image(a[1]).pixels, [&] {
    std::vector<double> q(restored.pixels.data().begin(), restored.pixels.data().end());
    for (double& v : q) v = std::round(v * 255.0) / 255.0;
    return Tensor(restored.pixels.shape(), q);
  }()));

  fs::create_directories(tmp.path / "empty");
  CHECK(infer(ckpt, tmp.path / "empty", tmp.path / "pred_empty").empty());
  CHECK_THROWS_AS(infer(ckpt, tmp.path / "missing", tmp.path / "x"), IoError);
  CHECK_THROWS_AS(infer(ckpt, tmp.path / "d" / "shadow", tmp.path / "x", GuidanceMode::kMatte), ConfigError);

  write_synthetic_dataset(tmp.path / "big", 1, 4, 24, 24);
  try {
    infer(ckpt, tmp.path / "big" / "shadow", tmp.path / "pred_big");
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("resize") != std::string::npos);
  }
  CHECK(!fs::exists(tmp.path / "pred_big"));
}

TEST_CASE("evaluation over directories") {
  TempDir tmp("evaluate");
  write_synthetic_dataset(tmp.path / "d", 3, 6, 16, 16);
  const fs::path gt = tmp.path / "d" / "shadow_free";

  const MetricsReport same = evaluate(gt, gt);
  REQUIRE(same.rows.size() == 3);
  for (const auto& r : same.rows) {
    CHECK(r.psnr_db == 100.0);
    CHECK(r.ssim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.rmse == 0.0);
  }
  CHECK(same.problems.empty());

  const fs::path pred = tmp.path / "d" / "shadow";
  fs::rename(pred / "synth_0002.png", pred / "other.png");
  const MetricsReport rep = evaluate(pred, gt);
  CHECK(rep.rows.size() == 2);
  CHECK(rep.problems.size() == 2);
  const MetricsRow agg = rep.aggregate();
  CHECK(std::abs(agg.psnr_db - (rep.rows[0].psnr_db + rep.rows[1].psnr_db) / 2) < 1e-12);
  CHECK(std::abs(agg.ssim - (rep.rows[0].ssim + rep.rows[1].ssim) / 2) < 1e-12);
  CHECK(std::abs(agg.rmse - (rep.rows[0].rmse + rep.rows[1].rmse) / 2) < 1e-12);

  fs::create_directories(tmp.path / "none");
  CHECK_THROWS_AS(evaluate(tmp.path / "none", gt), IoError);
}

TEST_CASE("lambda sweep and ablation harnesses") {
  TempDir tmp("experiments");
  write_synthetic_dataset(tmp.path / "d", 2, 10, 16, 16);
  RunConfig c = tiny_config(tmp.path / "d", tmp.path / "out");
  c.epochs = 1;

  SUBCASE("one row per lambda, single lambda equals a plain run") {
    c.lambdas = {0.1};
    const auto rows = lambda_sweep(c);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].selected);
    RunConfig solo = c;
    solo.out = tmp.path / "solo";
    const TrainResult r = train_removal(solo);
    CHECK(same_parameters(load_removal_model(rows[0].checkpoint).model.parameters(),
                          load_removal_model(r.checkpoint).model.parameters()));

    c.lambdas = {0.01, 0.5, 0.1};
    c.out = tmp.path / "out3";
    const auto three = lambda_sweep(c);
    REQUIRE(three.size() == 3);
    CHECK(three[1].lambda == 0.5);
    CHECK(std::count_if(three.begin(), three.end(), [](const SweepRow& s) { return s.selected; }) == 1);
    CHECK(count_lines(c.out / "lambda_sweep.csv") == 4);
  }

  SUBCASE("ablation matrix") {
    const auto rows = ablation_matrix(c);
    REQUIRE(rows.size() == 6);
    for (const auto& row : rows) {
      ModelConfig m = c.model;
      m.guidance = row.guidance;
      m.hfam_enabled = row.hfam;
      CHECK(row.parameters == parameter_count(m));
    }
    CHECK(rows[0].guidance == GuidanceMode::kNone);
    CHECK(rows[5].guidance == GuidanceMode::kMatte);
    CHECK(!rows[5].hfam);
    CHECK(count_lines(c.out / "ablation.csv") == 7);

    RunConfig solo = c;
    solo.model.guidance = GuidanceMode::kMatte;
    solo.matte_checkpoint = checkpoints_in(c.out / "matte_generator").back();
    solo.out = tmp.path / "solo";
    CHECK(same_parameters(load_removal_model(rows[4].checkpoint).model.parameters(),
                          load_removal_model(train_removal(solo).checkpoint).model.parameters()));
  }
}
