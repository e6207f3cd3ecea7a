#include "adasf/imageio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "adasf/ops.hpp"

namespace adasf {

namespace {

void skip_space_and_comments(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

std::size_t read_header_number(std::istream& in, const std::string& source, const char* field) {
  skip_space_and_comments(in);
  std::string digits;
  while (std::isdigit(in.peek())) digits.push_back(static_cast<char>(in.get()));
  if (digits.empty() || digits.size() > 9) {
    throw FormatError(source + ": bad or missing " + field + " in PNM header");
  }
  return std::stoul(digits);
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void require_gray_tensor(const Tensor& x, const char* what) {
  if (x.shape().n != 1 || x.shape().c != 1) {
    throw ShapeError(std::string(what) + ": expected [1,1,h,w], got " + x.shape().str());
  }
}

}  // namespace

Image parse_pnm(std::istream& in, const std::string& source) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw FormatError(source + ": not a binary PNM (expected magic P5 or P6)");
  }
  Image img;
  img.channels = magic[1] == '5' ? 1 : 3;
  img.width = read_header_number(in, source, "width");
  img.height = read_header_number(in, source, "height");
  const std::size_t maxval = read_header_number(in, source, "maxval");
  if (img.width == 0 || img.height == 0) throw FormatError(source + ": zero image dimension");
  if (maxval != 255) throw FormatError(source + ": maxval " + std::to_string(maxval) + " unsupported (need 255)");
  const int sep = in.get();
  if (sep != ' ' && sep != '\t' && sep != '\n' && sep != '\r') {
    throw FormatError(source + ": missing whitespace after PNM header");
  }
  const std::size_t bytes = img.width * img.height * img.channels;
  // Check the payload is actually there before allocating for it.
  const std::streampos start = in.tellg();
  if (start != std::streampos(-1)) {
    in.seekg(0, std::ios::end);
    const std::streampos end = in.tellg();
    in.seekg(start);
    if (end - start < static_cast<std::streamoff>(bytes)) {
      throw FormatError(source + ": truncated payload (" + std::to_string(end - start) + " of " +
                        std::to_string(bytes) + " bytes)");
    }
  }
  img.pixels.resize(bytes);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) {
    throw FormatError(source + ": truncated payload (" + std::to_string(in.gcount()) + " of " +
                      std::to_string(bytes) + " bytes)");
  }
  return img;
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  return parse_pnm(in, path.string());
}

std::string encode_pnm(const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw FormatError("encode_pnm: channels must be 1 or 3");
  if (img.pixels.size() != img.width * img.height * img.channels) {
    throw FormatError("encode_pnm: pixel buffer size does not match dimensions");
  }
  std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

void write_pnm(const std::filesystem::path& path, const Image& img) { atomic_write(path, encode_pnm(img)); }

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(path.string() + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw FormatError(path.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw FormatError(path.string() + ": rename failed");
  }
}

YCbCr rgb_to_ycbcr(const Image& img) {
  const std::size_t h = img.height;
  const std::size_t w = img.width;
  YCbCr out{Tensor({1, 1, h, w}), Tensor({1, 1, h, w}, 0.5), Tensor({1, 1, h, w}, 0.5)};
  for (std::size_t i = 0; i < h * w; ++i) {
    if (img.channels == 1) {
      out.y[i] = img.pixels[i] / 255.0;
      continue;
    }
    const double r = img.pixels[3 * i];
    const double g = img.pixels[3 * i + 1];
    const double b = img.pixels[3 * i + 2];
    out.y[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
    out.cb[i] = 0.5 + (-0.168736 * r - 0.331264 * g + 0.5 * b) / 255.0;
    out.cr[i] = 0.5 + (0.5 * r - 0.418688 * g - 0.081312 * b) / 255.0;
  }
  return out;
}

Image ycbcr_to_rgb(const Tensor& y, const Tensor& cb, const Tensor& cr) {
  require_gray_tensor(y, "ycbcr_to_rgb");
  require_same_shape(y, cb, "ycbcr_to_rgb");
  require_same_shape(y, cr, "ycbcr_to_rgb");
  Image img;
  img.height = y.shape().h;
  img.width = y.shape().w;
  img.channels = 3;
  img.pixels.resize(img.width * img.height * 3);
  for (std::size_t i = 0; i < y.numel(); ++i) {
    const double yy = 255.0 * y[i];
    const double db = 255.0 * (cb[i] - 0.5);
    const double dr = 255.0 * (cr[i] - 0.5);
    img.pixels[3 * i] = to_byte(yy + 1.402 * dr);
    img.pixels[3 * i + 1] = to_byte(yy - 0.344136 * db - 0.714136 * dr);
    img.pixels[3 * i + 2] = to_byte(yy + 1.772 * db);
  }
  return img;
}

Tensor luminance(const Image& img) { return rgb_to_ycbcr(img).y; }

Image to_gray_image(const Tensor& x) {
  require_gray_tensor(x, "to_gray_image");
  Image img;
  img.height = x.shape().h;
  img.width = x.shape().w;
  img.channels = 1;
  img.pixels.resize(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) img.pixels[i] = to_byte(255.0 * x[i]);
  return img;
}

Padded pad_to_multiple(const Tensor& x, std::size_t m) {
  if (m == 0) throw std::invalid_argument("pad_to_multiple: multiple must be positive");
  const Shape& s = x.shape();
  const std::size_t ph = (m - s.h % m) % m;
  const std::size_t pw = (m - s.w % m) % m;
  if ((ph > 0 && ph >= s.h) || (pw > 0 && pw >= s.w)) {
    throw ShapeError("pad_to_multiple: image " + s.str() + " too small to reflect-pad to a multiple of " +
                     std::to_string(m));
  }
  return {pad(x, 0, ph, 0, pw, PadMode::Reflect), s.h, s.w};
}

Tensor crop_back(const Tensor& x, std::size_t orig_h, std::size_t orig_w) { return crop(x, 0, 0, orig_h, orig_w); }

std::vector<Tensor> patchify(const Tensor& x, std::size_t size, std::size_t stride) {
  const Shape& s = x.shape();
  if (size == 0 || stride == 0) throw std::invalid_argument("patchify: size and stride must be positive");
  if (size > s.h || size > s.w) throw ShapeError("patchify: patch " + std::to_string(size) + " exceeds " + s.str());
  std::vector<Tensor> out;
  for (std::size_t i = 0; i + size <= s.h; i += stride)
    for (std::size_t j = 0; j + size <= s.w; j += stride) out.push_back(crop(x, i, j, size, size));
  return out;
}

std::vector<Tensor> patchify_random(const Tensor& x, std::size_t size, std::size_t count, std::uint64_t seed) {
  const Shape& s = x.shape();
  if (size == 0 || size > s.h || size > s.w) {
    throw ShapeError("patchify_random: patch " + std::to_string(size) + " does not fit " + s.str());
  }
  std::mt19937_64 rng(seed);
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, s.h - size)(rng);
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, s.w - size)(rng);
    out.push_back(crop(x, i, j, size, size));
  }
  return out;
}

}  // namespace adasf
