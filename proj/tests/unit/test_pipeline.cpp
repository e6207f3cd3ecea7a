#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "adasf/config.hpp"
#include "adasf/pipeline.hpp"
#include "oracles.hpp"

using namespace adasf;

namespace {

FusionConfig micro() { return micro_settings().model; }

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::ranges::equal(a.data(), b.data());
}

// Hand layer-size audit, independent of ModelParams.
std::size_t block_size(std::size_t w, std::size_t cp, std::size_t g, std::size_t d, std::size_t ratio) {
  const std::size_t proj = 2 * cp + 2 * g * d;
  const std::size_t hidden = ratio * w;
  return 2 * w                   // norm1
         + proj * w + proj       // w_in, b_in
         + proj * 9 + proj       // depthwise w_se, b_se
         + 1                     // lambda_raw
         + cp * w + cp           // w_gate, b_gate
         + w * cp + w            // w_out, b_out
         + 2 * w                 // norm2
         + hidden * w + hidden   // mlp.w1, mlp.b1
         + w * hidden + w;       // mlp.w2, mlp.b2
}

std::size_t audited_count(std::size_t c, std::size_t n1, std::size_t n2) {
  const std::size_t cp = 2 * c;
  const std::size_t stem = 9 * c + c;
  const std::size_t wavelet = 4 * 2 + 4 * (9 * c + c);
  const std::size_t head = c * (c / 2) * 4 + c / 2 + (c / 2) * 9 + 1;
  return stem + wavelet + n1 * block_size(3 * c, cp, 1, 16, 2) + n1 * block_size(c, cp, 1, 16, 2) +
         n2 * block_size(c, cp, 1, 16, 2) + head;
}

Tensor image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return oracle::random_tensor({1, 1, h, w}, rng, 0.0, 1.0);
}

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "adasf_test_pipeline";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("micro parameter count matches the hand audit") {
  const ModelParams p = ModelParams::create(micro());
  CHECK(audited_count(4, 1, 1) == 4016);
  CHECK(param_count(p) == 4016);
}

TEST_CASE("default parameter count is the golden value inside the budget") {
  const ModelParams p = ModelParams::create(FusionConfig{});
  CHECK(param_count(p) == audited_count(64, 2, 4));
  CHECK(param_count(p) == 855249);
  CHECK(param_count(p) >= 590000);
  CHECK(param_count(p) <= 980000);
  FusionConfig half;
  half.channels = 32;
  CHECK(param_count(ModelParams::create(half)) < param_count(p));
}

TEST_CASE("parameter names are unique and init is deterministic") {
  ModelParams a = ModelParams::create(micro());
  ModelParams b = ModelParams::create(micro());
  std::vector<std::string> names;
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    names.push_back(pa[i]->name());
    CHECK(same(pa[i]->value, pb[i]->value));
  }
  std::ranges::sort(names);
  CHECK(std::ranges::adjacent_find(names) == names.end());
  FusionConfig other = micro();
  other.seed = 1;
  CHECK_FALSE(same(ModelParams::create(other).stem_w.value, a.stem_w.value));
}

TEST_CASE("embed halves the grid into C channels") {
  FusionConfig cfg;
  ModelParams p = ModelParams::create(cfg);
  const Tensor e = embed(image(128, 128, 1), p);
  CHECK(e.shape() == Shape{1, 64, 64, 64});
}

TEST_CASE("embed of zeros with zero bias is zero") {
  ModelParams p = ModelParams::create(micro());
  p.stem_b.value = Tensor(p.stem_b.value.shape());
  const Tensor e = embed(Tensor({1, 1, 16, 16}), p);
  CHECK(std::ranges::all_of(e.data(), [](double v) { return v == 0.0; }));
}

TEST_CASE("embed matches the loop convolution oracle") {
  ModelParams p = ModelParams::create(micro());
  const Tensor x = image(12, 8, 2);
  const Tensor e = embed(x, p);
  const Tensor ref = oracle::conv2d_loops(x, p.stem_w.value, p.stem_b.value, 2, 1, 1, 1);
  REQUIRE(e.shape() == ref.shape());
  for (std::size_t i = 0; i < e.numel(); ++i) {
    const double v = ref[i];
    CHECK(std::abs(e[i] - v / (1.0 + std::exp(-v))) < 1e-12);
  }
}

TEST_CASE("embed rejects sizes not divisible by 4") {
  ModelParams p = ModelParams::create(micro());
  try {
    embed(Tensor({1, 1, 18, 16}), p);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("pad") != std::string::npos);
  }
  CHECK_THROWS_AS(embed(Tensor({1, 2, 16, 16}), p), ShapeError);
}

TEST_CASE("freq_segmented_fuse adds subbands and stacks the high bands") {
  std::mt19937_64 rng(3);
  const auto bands = [&rng](std::size_t c) {
    return SubbandSet{oracle::random_tensor({1, c, 4, 4}, rng), oracle::random_tensor({1, c, 4, 4}, rng),
                      oracle::random_tensor({1, c, 4, 4}, rng), oracle::random_tensor({1, c, 4, 4}, rng)};
  };
  const SubbandSet s1 = bands(3);
  const SubbandSet zero{Tensor({1, 3, 4, 4}), Tensor({1, 3, 4, 4}), Tensor({1, 3, 4, 4}), Tensor({1, 3, 4, 4})};
  const FusedBands f0 = freq_segmented_fuse(s1, zero);
  CHECK(same(f0.lo, s1.ll));
  REQUIRE(f0.hi.shape() == Shape{1, 9, 4, 4});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(f0.hi.plane(0, c)[i] == s1.lh.plane(0, c)[i]);
      CHECK(f0.hi.plane(0, 3 + c)[i] == s1.hl.plane(0, c)[i]);
      CHECK(f0.hi.plane(0, 6 + c)[i] == s1.hh.plane(0, c)[i]);
    }
  }
  const FusedBands f2 = freq_segmented_fuse(s1, s1);
  for (std::size_t i = 0; i < f2.lo.numel(); ++i) CHECK(f2.lo[i] == 2.0 * s1.ll[i]);
  for (std::size_t i = 0; i < 16; ++i) CHECK(f2.hi.plane(0, 4)[i] == 2.0 * s1.hl.plane(0, 1)[i]);

  const SubbandSet wide = bands(64);
  CHECK(freq_segmented_fuse(wide, wide).hi.shape().c == 192);
  SubbandSet bad = s1;
  bad.hh = Tensor({1, 3, 2, 2});
  CHECK_THROWS_AS(freq_segmented_fuse(s1, bad), ShapeError);
}

TEST_CASE("fuse keeps the input shape at default width") {
  ModelParams p = ModelParams::create(FusionConfig{});
  const Tensor f = fuse(image(128, 128, 4), image(128, 128, 5), p);
  CHECK(f.shape() == Shape{1, 1, 128, 128});
  CHECK(std::ranges::all_of(f.data(), [](double v) { return v >= 0.0 && v <= 1.0; }));
}

TEST_CASE("fuse shape chain for several sizes divisible by 4") {
  ModelParams p = ModelParams::create(micro());
  for (const auto& [h, w] : {std::pair<std::size_t, std::size_t>{16, 16}, {8, 24}, {20, 12}}) {
    const Tensor i1 = image(h, w, h * 7 + w);
    CHECK(embed(i1, p).shape() == Shape{1, 4, h / 2, w / 2});
    const SubbandSet sb = adawat_forward(embed(i1, p), p.adawat, true);
    CHECK(sb.ll.shape() == Shape{1, 4, h / 4, w / 4});
    CHECK(adaiwat(sb, p.adawat).shape() == Shape{1, 4, h / 2, w / 2});
    CHECK(fuse(i1, image(h, w, 99), p).shape() == Shape{1, 1, h, w});
  }
}

TEST_CASE("fuse is exactly symmetric in its sources") {
  ModelParams p = ModelParams::create(micro());
  // Leave the zero init so the residual paths are live.
  std::mt19937_64 rng(6);
  for (Parameter* q : p.parameters()) {
    if (q->name().ends_with("w_out") || q->name().ends_with("mlp.w2")) {
      q->value = oracle::random_tensor(q->value.shape(), rng, -0.3, 0.3);
    }
  }
  const Tensor a = image(16, 20, 7);
  const Tensor b = image(16, 20, 8);
  for (MaskMode m : {MaskMode::Hard, MaskMode::Soft}) {
    CHECK(same(fuse(a, b, p, m), fuse(b, a, p, m)));
  }
}

TEST_CASE("fuse output stays in [0,1] for extreme inputs") {
  ModelParams p = ModelParams::create(micro());
  for (Parameter* q : p.parameters()) {
    for (double& v : q->value.data()) v *= 5.0;
  }
  const Tensor ones({1, 1, 16, 16}, 1.0);
  const Tensor f = fuse(ones, Tensor({1, 1, 16, 16}), p);
  CHECK(std::ranges::all_of(f.data(), [](double v) { return v >= 0.0 && v <= 1.0; }));
}

TEST_CASE("fuse rejects mismatched sources") {
  ModelParams p = ModelParams::create(micro());
  CHECK_THROWS_AS(fuse(Tensor({1, 1, 16, 16}), Tensor({1, 1, 16, 20}), p), ShapeError);
}

TEST_CASE("non-finite values are reported with the stage name") {
  ModelParams p = ModelParams::create(micro());
  Tensor bad = image(16, 16, 9);
  bad[5] = std::numeric_limits<double>::quiet_NaN();
  try {
    fuse(bad, image(16, 16, 10), p);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.stage() == "embed");
  }
  p.deep[0].w_in.value[0] = std::numeric_limits<double>::infinity();
  try {
    fuse(image(16, 16, 11), image(16, 16, 10), p);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.stage() == "deep.0");
    CHECK(std::string(e.what()).find("deep.0") != std::string::npos);
  }
}

TEST_CASE("zero training steps leave parameters unchanged") {
  ModelParams p = ModelParams::create(micro());
  const ModelParams before = p;
  TrainState st;
  TrainConfig tc;
  tc.steps = 0;
  const auto rec = train_toy(p, st, {{image(16, 16, 1), image(16, 16, 2)}}, tc);
  CHECK(rec.empty());
  const auto a = p.parameters();
  const auto b = before.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(same(a[i]->value, b[i]->value));
}

TEST_CASE("empty dataset is rejected") {
  ModelParams p = ModelParams::create(micro());
  TrainState st;
  CHECK_THROWS_AS(train_toy(p, st, {}, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("training is deterministic and lowers the loss") {
  const std::vector<ImagePair> pairs{{image(16, 16, 1), image(16, 16, 2)}, {image(16, 16, 3), image(16, 16, 4)}};
  TrainConfig tc;
  tc.steps = 12;
  tc.lr = 3e-3;
  tc.batch = 1;
  tc.patch = 12;
  ModelParams p1 = ModelParams::create(micro());
  ModelParams p2 = ModelParams::create(micro());
  TrainState s1;
  TrainState s2;
  const auto r1 = train_toy(p1, s1, pairs, tc);
  const auto r2 = train_toy(p2, s2, pairs, tc);
  REQUIRE(r1.size() == 12);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1[i].step == i + 1);
    CHECK(r1[i].loss.l_total == r2[i].loss.l_total);
    CHECK(r1[i].smoothed == r2[i].smoothed);
  }
  CHECK(r1.front().smoothed == doctest::Approx(r1.front().loss.l_total).epsilon(1e-12));
  CHECK(r1.back().smoothed < r1.front().loss.l_total);
}

TEST_CASE("resuming from a checkpoint reproduces an uninterrupted run") {
  const std::vector<ImagePair> pairs{{image(16, 16, 5), image(16, 16, 6)}};
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.steps = 6;
  ModelParams full = ModelParams::create(micro());
  TrainState fs;
  const auto all = train_toy(full, fs, pairs, tc);

  tc.steps = 3;
  ModelParams part = ModelParams::create(micro());
  TrainState ps;
  train_toy(part, ps, pairs, tc);
  const auto path = temp_dir() / "resume.ckpt";
  save_checkpoint(path, part, &ps);
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.state.adam.step == 3);
  const auto rest = train_toy(ck.params, ck.state, pairs, tc);
  REQUIRE(rest.size() == 3);
  CHECK(rest.front().step == 4);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rest[i].loss.l_total == all[3 + i].loss.l_total);
    CHECK(rest[i].smoothed == all[3 + i].smoothed);
  }
  const auto a = ck.params.parameters();
  const auto b = full.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(same(a[i]->value, b[i]->value));
}

TEST_CASE("checkpoint roundtrip is bit exact and rejects mismatches") {
  FusionConfig cfg = micro();
  cfg.seed = 17;
  cfg.aggregation = Aggregation::Mean;
  const ModelParams p = ModelParams::create(cfg);
  const auto path = temp_dir() / "plain.ckpt";
  save_checkpoint(path, p);
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.params.config.seed == 17);
  CHECK(ck.params.config.aggregation == Aggregation::Mean);
  CHECK(ck.state.adam.step == 0);
  const auto a = ck.params.parameters();
  const auto b = p.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(same(a[i]->value, b[i]->value));

  std::ifstream in(path, std::ios::binary);
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto rewrite = [&](const std::string& content) {
    const auto bad = temp_dir() / "bad.ckpt";
    std::ofstream(bad, std::ios::binary) << content;
    return bad;
  };
  // Shape disagreeing with the config.
  std::string shape_bad = bytes;
  const auto pos = shape_bad.find("stem.w 4 1 3 3");
  REQUIRE(pos != std::string::npos);
  shape_bad.replace(pos, 14, "stem.w 4 1 3 2");
  CHECK_THROWS_AS(load_checkpoint(rewrite(shape_bad)), FormatError);
  // Config echo changed so the parameter list no longer matches.
  std::string cfg_bad = bytes;
  cfg_bad.replace(cfg_bad.find("n2=1"), 4, "n2=2");
  CHECK_THROWS_AS(load_checkpoint(rewrite(cfg_bad)), FormatError);
  CHECK_THROWS_AS(load_checkpoint(rewrite(bytes.substr(0, bytes.size() - 8))), FormatError);
  CHECK_THROWS_AS(load_checkpoint(rewrite("garbage\n")), FormatError);
  CHECK_THROWS_AS(load_checkpoint(temp_dir() / "missing.ckpt"), FormatError);
}

TEST_CASE("config parsing") {
  RunSettings s;
  apply_config_text(s, "# comment\nchannels = 8\n\nn1=1 # trailing\naggregation=mean\nlr=0.001\nseed=42\n");
  CHECK(s.model.channels == 8);
  CHECK(s.model.n1 == 1);
  CHECK(s.model.aggregation == Aggregation::Mean);
  CHECK(s.train.lr == 0.001);
  CHECK(s.model.seed == 42);
  RunSettings t;
  CHECK_THROWS_AS(apply_config_text(t, "colour=red\n"), FormatError);
  CHECK_THROWS_AS(apply_config_text(t, "channels=8\nchannels=4\n"), FormatError);
  CHECK_THROWS_AS(apply_config_text(t, "channels=eight\n"), FormatError);
  CHECK_THROWS_AS(apply_config_text(t, "channels=3\n"), FormatError);
  CHECK_THROWS_AS(apply_config_text(t, "mu_ssim=-1\n"), FormatError);
  CHECK_THROWS_AS(apply_config_text(t, "just text\n"), FormatError);
  RunSettings echo;
  apply_config_text(echo, "channels=8\nk_sharp=12.5\n");
  RunSettings again;
  apply_config_text(again, settings_to_text(echo));
  CHECK(settings_to_text(again) == settings_to_text(echo));
}
