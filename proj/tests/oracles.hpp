#pragma once

// Independent reference implementations used only by tests. They favour
// directness over speed and share no code with the library kernels.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "adasf/tensor.hpp"

namespace oracle {

using adasf::Shape;
using adasf::Tensor;

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (double& v : t.data()) v = d(rng);
  return t;
}

inline double at_or_zero(const Tensor& x, std::size_t n, std::size_t c, long long h, long long w) {
  if (h < 0 || w < 0 || h >= static_cast<long long>(x.shape().h) || w >= static_cast<long long>(x.shape().w)) {
    return 0.0;
  }
  return x.at(n, c, static_cast<std::size_t>(h), static_cast<std::size_t>(w));
}

/// Direct nested-loop grouped/dilated/strided cross-correlation.
inline Tensor conv2d_loops(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
                           std::size_t dilation, std::size_t groups, std::size_t pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  const std::size_t k = ws.h;
  const std::size_t oh = (xs.h + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
  const std::size_t ow = (xs.w + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
  const std::size_t cig = xs.c / groups;
  const std::size_t cog = ws.n / groups;
  Tensor out({xs.n, ws.n, oh, ow});
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t co = 0; co < ws.n; ++co)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = bias.empty() ? 0.0 : bias[co];
          const std::size_t g = co / cog;
          for (std::size_t cil = 0; cil < cig; ++cil)
            for (std::size_t a = 0; a < k; ++a)
              for (std::size_t b = 0; b < k; ++b) {
                const long long r = static_cast<long long>(i * stride + a * dilation) - static_cast<long long>(pad);
                const long long q = static_cast<long long>(j * stride + b * dilation) - static_cast<long long>(pad);
                acc += w.at(co, cil, a, b) * at_or_zero(x, n, g * cig + cil, r, q);
              }
          out.at(n, co, i, j) = acc;
        }
  return out;
}

/// O(N^2) direct 2-D DFT of every plane, unitary scaling.
inline void dft2_direct(const Tensor& x, std::vector<double>& re, std::vector<double>& im) {
  const Shape s = x.shape();
  re.assign(s.numel(), 0.0);
  im.assign(s.numel(), 0.0);
  const double norm = 1.0 / std::sqrt(static_cast<double>(s.h * s.w));
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t u = 0; u < s.h; ++u)
        for (std::size_t v = 0; v < s.w; ++v) {
          std::complex<double> acc = 0.0;
          for (std::size_t i = 0; i < s.h; ++i)
            for (std::size_t j = 0; j < s.w; ++j) {
              const double ang = -2.0 * std::numbers::pi *
                                 (static_cast<double>(u * i) / static_cast<double>(s.h) +
                                  static_cast<double>(v * j) / static_cast<double>(s.w));
              acc += x.at(n, c, i, j) * std::polar(1.0, ang);
            }
          const std::size_t idx = ((n * s.c + c) * s.h + u) * s.w + v;
          re[idx] = acc.real() * norm;
          im[idx] = acc.imag() * norm;
        }
}

enum class Dir { LR, RL, TB, BT };

/// Per-position recurrence for one scan direction, written position by
/// position with explicit state arrays.
inline Tensor scan_direction_naive(const Tensor& X, const Tensor& A, const Tensor& B, const Tensor& C,
                                   std::size_t groups, Dir dir) {
  const Shape s = X.shape();
  const std::size_t d = B.shape().c / groups;
  const std::size_t cpg = s.c / groups;
  Tensor Y(s);
  const bool rows = dir == Dir::LR || dir == Dir::RL;
  const std::size_t lines = rows ? s.h : s.w;
  const std::size_t len = rows ? s.w : s.h;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t ch = 0; ch < s.c; ++ch) {
      const std::size_t g = ch / cpg;
      for (std::size_t line = 0; line < lines; ++line) {
        std::vector<double> h(d, 0.0);
        for (std::size_t t = 0; t < len; ++t) {
          std::size_t i = 0;
          std::size_t j = 0;
          switch (dir) {
            case Dir::LR: i = line; j = t; break;
            case Dir::RL: i = line; j = len - 1 - t; break;
            case Dir::TB: i = t; j = line; break;
            case Dir::BT: i = len - 1 - t; j = line; break;
          }
          double y = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            h[k] = A.at(n, ch, i, j) * h[k] + B.at(n, g * d + k, i, j) * X.at(n, ch, i, j);
            y += C.at(n, g * d + k, i, j) * h[k];
          }
          Y.at(n, ch, i, j) = y;
        }
      }
    }
  return Y;
}

/// Plain-loop SSIM with an explicitly built 11x11 Gaussian window, valid region.
inline double ssim_loops(const Tensor& x, const Tensor& y) {
  const int win = 11;
  const double sigma = 1.5;
  double g[11][11];
  double total = 0.0;
  for (int a = 0; a < win; ++a)
    for (int b = 0; b < win; ++b) {
      const double da = a - 5;
      const double db = b - 5;
      g[a][b] = std::exp(-(da * da + db * db) / (2 * sigma * sigma));
      total += g[a][b];
    }
  for (auto& row : g)
    for (double& v : row) v /= total;
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const Shape s = x.shape();
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t i = 0; i + win <= s.h; ++i)
      for (std::size_t j = 0; j + win <= s.w; ++j) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int a = 0; a < win; ++a)
          for (int b = 0; b < win; ++b) {
            const double xv = x.at(n, 0, i + a, j + b);
            const double yv = y.at(n, 0, i + a, j + b);
            mx += g[a][b] * xv;
            my += g[a][b] * yv;
            sxx += g[a][b] * xv * xv;
            syy += g[a][b] * yv * yv;
            sxy += g[a][b] * xv * yv;
          }
        sxx -= mx * mx;
        syy -= my * my;
        sxy -= mx * my;
        acc += ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
        ++count;
      }
  return acc / static_cast<double>(count);
}

}  // namespace oracle
