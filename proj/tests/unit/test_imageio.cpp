#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "adasf/imageio.hpp"
#include "oracles.hpp"

using namespace adasf;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "adasf_test_imageio";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image random_rgb(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  Image img{w, h, 3, std::vector<std::uint8_t>(w * h * 3)};
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(d(rng));
  return img;
}

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::ranges::equal(a.data(), b.data());
}

}  // namespace

TEST_CASE("P5 2x2 roundtrip is byte identical") {
  const std::string bytes = std::string("P5\n2 2\n255\n") + std::string("\x00\x7f\x80\xff", 4);
  const auto path = temp_dir() / "tiny.pgm";
  { std::ofstream(path, std::ios::binary) << bytes; }
  const Image img = read_pnm(path);
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.channels == 1);
  CHECK(img.pixels == std::vector<std::uint8_t>{0, 127, 128, 255});
  const auto out = temp_dir() / "tiny_out.pgm";
  write_pnm(out, img);
  CHECK(slurp(out) == bytes);
  CHECK_FALSE(std::filesystem::exists(temp_dir() / "tiny_out.pgm.tmp"));
}

TEST_CASE("P6 header comments are skipped") {
  std::istringstream in(std::string("P6 # colour\n# another\n1 # w\n2\n# max\n255\n") +
                        std::string("\x01\x02\x03\x04\x05\x06", 6));
  const Image img = parse_pnm(in);
  CHECK(img.channels == 3);
  CHECK(img.width == 1);
  CHECK(img.height == 2);
  CHECK(img.pixels == std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("malformed PNM inputs raise descriptive errors") {
  const auto fails_with = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      parse_pnm(in);
    } catch (const FormatError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_with("P2\n2 2\n255\n", "magic"));
  CHECK(fails_with("P5\n2 2\n65535\n", "maxval"));
  CHECK(fails_with(std::string("P5\n2 2\n255\n\x01\x02", 13), "truncated"));
  CHECK(fails_with("P5\n2\n", "height"));
  CHECK(fails_with("P5\n999999999 999999999\n255\n", "truncated"));
  CHECK_THROWS_AS(read_pnm(temp_dir() / "does_not_exist.pgm"), FormatError);
}

TEST_CASE("random RGB and gray images survive a file roundtrip") {
  std::mt19937_64 rng(3);
  Image img = random_rgb(5, 7, rng);
  const auto path = temp_dir() / "rand.ppm";
  write_pnm(path, img);
  const Image back = read_pnm(path);
  CHECK(back.pixels == img.pixels);
  const std::string first = slurp(path);
  write_pnm(path, back);
  CHECK(slurp(path) == first);
}

TEST_CASE("gray pixels map to y = v/255 with neutral chroma") {
  Image img{4, 1, 3, {0, 0, 0, 64, 64, 64, 200, 200, 200, 255, 255, 255}};
  const YCbCr ycc = rgb_to_ycbcr(img);
  const int levels[] = {0, 64, 200, 255};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(ycc.y[i] == doctest::Approx(levels[i] / 255.0).epsilon(1e-12));
    CHECK(std::abs(ycc.cb[i] - 0.5) < 1e-12);
    CHECK(std::abs(ycc.cr[i] - 0.5) < 1e-12);
  }
  Image gray{2, 1, 1, {10, 250}};
  const YCbCr g = rgb_to_ycbcr(gray);
  CHECK(g.y[1] == doctest::Approx(250 / 255.0));
  CHECK(g.cb[0] == 0.5);
}

TEST_CASE("pure red luminance is 0.299") {
  Image img{1, 1, 3, {255, 0, 0}};
  const YCbCr ycc = rgb_to_ycbcr(img);
  CHECK(std::abs(ycc.y[0] - 0.299) < 1.0 / 255.0);
  CHECK(std::abs(ycc.cr[0] - 1.0) < 1.0 / 255.0);
}

TEST_CASE("YCbCr roundtrip is within one level per channel") {
  std::mt19937_64 rng(11);
  const Image img = random_rgb(32, 32, rng);
  const YCbCr ycc = rgb_to_ycbcr(img);
  const Image back = ycbcr_to_rgb(ycc.y, ycc.cb, ycc.cr);
  int worst = 0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) worst = std::max(worst, std::abs(img.pixels[i] - back.pixels[i]));
  CHECK(worst <= 1);
}

TEST_CASE("recombining a replaced Y keeps the source chroma") {
  std::mt19937_64 rng(12);
  const Image img = random_rgb(16, 16, rng);
  const YCbCr src = rgb_to_ycbcr(img);
  // Identity fusion of Y: recombined chroma matches the source to within rounding.
  const YCbCr again = rgb_to_ycbcr(ycbcr_to_rgb(src.y, src.cb, src.cr));
  for (std::size_t i = 0; i < src.cb.numel(); ++i) {
    CHECK(std::abs(again.cb[i] - src.cb[i]) < 2.0 / 255.0);
    CHECK(std::abs(again.cr[i] - src.cr[i]) < 2.0 / 255.0);
  }
}

TEST_CASE("gray tensor to image rounds and clamps") {
  Tensor t({1, 1, 1, 4});
  t[0] = -0.1;
  t[1] = 0.5;
  t[2] = 1.0 / 255.0;
  t[3] = 1.7;
  const Image img = to_gray_image(t);
  CHECK(img.pixels == std::vector<std::uint8_t>{0, 128, 1, 255});
  CHECK_THROWS_AS(to_gray_image(Tensor({1, 2, 2, 2})), ShapeError);
}

TEST_CASE("pad_to_multiple leaves multiples untouched") {
  std::mt19937_64 rng(1);
  const Tensor x = oracle::random_tensor({1, 1, 8, 12}, rng);
  const Padded p = pad_to_multiple(x, 4);
  CHECK(p.tensor.shape() == x.shape());
  CHECK(same(p.tensor, x));
}

TEST_CASE("130x130 pads to 132x132 with mirrored border rows") {
  std::mt19937_64 rng(2);
  const Tensor x = oracle::random_tensor({1, 1, 130, 130}, rng);
  const Padded p = pad_to_multiple(x, 4);
  CHECK(p.tensor.shape() == Shape{1, 1, 132, 132});
  CHECK(p.orig_h == 130);
  CHECK(p.orig_w == 130);
  for (std::size_t j = 0; j < 130; ++j) {
    CHECK(p.tensor.at(0, 0, 130, j) == x.at(0, 0, 128, j));
    CHECK(p.tensor.at(0, 0, 131, j) == x.at(0, 0, 127, j));
  }
  for (std::size_t i = 0; i < 130; ++i) {
    CHECK(p.tensor.at(0, 0, i, 130) == x.at(0, 0, i, 128));
    CHECK(p.tensor.at(0, 0, i, 131) == x.at(0, 0, i, 127));
  }
  CHECK(p.tensor.at(0, 0, 131, 131) == x.at(0, 0, 127, 127));
  const Tensor back = crop_back(p.tensor, p.orig_h, p.orig_w);
  CHECK(same(back, x));
}

TEST_CASE("pad_to_multiple rejects images too small to reflect") {
  CHECK_THROWS_AS(pad_to_multiple(Tensor({1, 1, 1, 4}), 4), ShapeError);
  CHECK_THROWS_AS(pad_to_multiple(Tensor({1, 1, 4, 4}), 0), std::invalid_argument);
}

TEST_CASE("grid patchify counts and matches source slices") {
  std::mt19937_64 rng(4);
  const Tensor x = oracle::random_tensor({1, 1, 128, 128}, rng);
  const auto patches = patchify(x, 64, 64);
  REQUIRE(patches.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t oi = (k / 2) * 64;
    const std::size_t oj = (k % 2) * 64;
    for (std::size_t i = 0; i < 64; i += 7)
      for (std::size_t j = 0; j < 64; j += 5) CHECK(patches[k].at(0, 0, i, j) == x.at(0, 0, oi + i, oj + j));
  }
  CHECK(patchify(x, 64, 32).size() == 9);
  CHECK_THROWS_AS(patchify(x, 129, 1), ShapeError);
}

TEST_CASE("random patchify is deterministic under its seed") {
  std::mt19937_64 rng(5);
  const Tensor x = oracle::random_tensor({1, 1, 40, 50}, rng);
  const auto a = patchify_random(x, 16, 6, 99);
  const auto b = patchify_random(x, 16, 6, 99);
  const auto c = patchify_random(x, 16, 6, 100);
  REQUIRE(a.size() == 6);
  bool differs = false;
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(same(a[k], b[k]));
    CHECK(a[k].shape() == Shape{1, 1, 16, 16});
    differs = differs || !same(a[k], c[k]);
  }
  CHECK(differs);
}
