#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "adasf/tensor.hpp"

namespace adasf {

/// 8-bit raster, row-major, channels interleaved (1 = gray, 3 = RGB).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;
};

/// Binary PNM: P5 (gray) or P6 (RGB), maxval 255, '#' comments in the header.
Image parse_pnm(std::istream& in, const std::string& source = "<stream>");
Image read_pnm(const std::filesystem::path& path);
std::string encode_pnm(const Image& img);
/// Writes through a temporary file in the same directory and renames it.
void write_pnm(const std::filesystem::path& path, const Image& img);

/// Temp file + rename so readers never observe a partial file.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

struct YCbCr {
  Tensor y;   // [1,1,h,w] in [0,1]
  Tensor cb;  // 0.5 is achromatic
  Tensor cr;
};

/// BT.601 full range. Gray images get cb = cr = 0.5.
YCbCr rgb_to_ycbcr(const Image& img);
Image ycbcr_to_rgb(const Tensor& y, const Tensor& cb, const Tensor& cr);

/// Luminance of any PNM as [1,1,h,w] in [0,1].
Tensor luminance(const Image& img);
/// Gray image from a [1,1,h,w] tensor, rounding and clamping to [0,255].
Image to_gray_image(const Tensor& x);

struct Padded {
  Tensor tensor;
  std::size_t orig_h = 0;
  std::size_t orig_w = 0;
};

/// Reflect-pads bottom and right up to the next multiple of m.
Padded pad_to_multiple(const Tensor& x, std::size_t m);
/// Top-left orig_h x orig_w window.
Tensor crop_back(const Tensor& x, std::size_t orig_h, std::size_t orig_w);

/// Grid crops of size x size at the given stride, row-major order.
std::vector<Tensor> patchify(const Tensor& x, std::size_t size, std::size_t stride);
/// `count` uniformly placed crops drawn from a generator seeded with `seed`.
std::vector<Tensor> patchify_random(const Tensor& x, std::size_t size, std::size_t count, std::uint64_t seed);

}  // namespace adasf
