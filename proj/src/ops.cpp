#include "adasf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace adasf {
namespace {

using Index = long long;

struct ConvGeometry {
  std::size_t n, c_in, c_out, cig, cog, k, h, w, oh, ow;
};

ConvGeometry check_conv(const Shape& xs, const Shape& ws, const ConvParams& p, const char* what) {
  if (p.stride == 0 || p.dilation == 0 || p.groups == 0) {
    throw ShapeError(std::string(what) + ": stride, dilation and groups must be >= 1");
  }
  if (ws.h != ws.w) throw ShapeError(std::string(what) + ": kernel must be square, got " + ws.str());
  if (xs.c % p.groups != 0) {
    throw ShapeError(std::string(what) + ": groups " + std::to_string(p.groups) + " do not divide input channels " +
                     std::to_string(xs.c));
  }
  if (ws.n % p.groups != 0) {
    throw ShapeError(std::string(what) + ": groups " + std::to_string(p.groups) +
                     " do not divide output channels " + std::to_string(ws.n));
  }
  if (ws.c != xs.c / p.groups) {
    throw ShapeError(std::string(what) + ": weight " + ws.str() + " expects " + std::to_string(ws.c * p.groups) +
                     " input channels, got " + std::to_string(xs.c));
  }
  ConvGeometry g{};
  g.n = xs.n;
  g.c_in = xs.c;
  g.c_out = ws.n;
  g.cig = ws.c;
  g.cog = ws.n / p.groups;
  g.k = ws.h;
  g.h = xs.h;
  g.w = xs.w;
  g.oh = conv_out_size(xs.h, g.k, p);
  g.ow = conv_out_size(xs.w, g.k, p);
  return g;
}

// Output columns [lo, hi) whose tap at kernel column `kw` lands inside [0, in).
void tap_range(std::size_t in, std::size_t out, std::size_t kw, const ConvParams& p, std::size_t& lo,
               std::size_t& hi) {
  const Index s = static_cast<Index>(p.stride);
  const Index off = static_cast<Index>(kw * p.dilation) - static_cast<Index>(p.pad);
  Index first = 0;
  if (off < 0) first = (-off + s - 1) / s;
  const Index last_in = static_cast<Index>(in) - 1 - off;
  Index end = last_in < 0 ? 0 : last_in / s + 1;
  end = std::min<Index>(end, static_cast<Index>(out));
  lo = static_cast<std::size_t>(std::min<Index>(first, end));
  hi = static_cast<std::size_t>(end);
}

template <class Body>
void for_each_tap(const ConvGeometry& g, const ConvParams& p, Body&& body) {
  // body(n, co, ci, widx, kh, kw)
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t grp = 0; grp < p.groups; ++grp) {
      for (std::size_t col = 0; col < g.cog; ++col) {
        const std::size_t co = grp * g.cog + col;
        for (std::size_t cil = 0; cil < g.cig; ++cil) {
          const std::size_t ci = grp * g.cig + cil;
          for (std::size_t kh = 0; kh < g.k; ++kh) {
            for (std::size_t kw = 0; kw < g.k; ++kw) {
              body(n, co, ci, ((co * g.cig + cil) * g.k + kh) * g.k + kw, kh, kw);
            }
          }
        }
      }
    }
  }
}

// Input row touched by output row `o` at kernel row `kh`, or -1.
Index tap_row(std::size_t o, std::size_t kh, std::size_t in, const ConvParams& p) {
  const Index r = static_cast<Index>(o * p.stride + kh * p.dilation) - static_cast<Index>(p.pad);
  return (r < 0 || r >= static_cast<Index>(in)) ? -1 : r;
}

// 1x1, stride 1, no padding, one group: a plain matrix product per image.
bool pointwise(const ConvGeometry& g, const ConvParams& p) {
  return g.k == 1 && p.stride == 1 && p.pad == 0 && p.groups == 1;
}

// out[n, r] += sum_k m(r, k) * in[n, k] over whole planes; m(r, k) = md[r * rs + k * ks].
void plane_matmul(const Tensor& in, Tensor& out, const double* md, std::size_t rs, std::size_t ks) {
  const std::size_t rows = out.shape().c;
  const std::size_t inner = in.shape().c;
  const std::size_t len = in.shape().plane();
  for (std::size_t n = 0; n < in.shape().n; ++n) {
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) {
      double* o0 = out.plane(n, r);
      double* o1 = out.plane(n, r + 1);
      double* o2 = out.plane(n, r + 2);
      double* o3 = out.plane(n, r + 3);
      for (std::size_t k = 0; k < inner; ++k) {
        const double m0 = md[r * rs + k * ks];
        const double m1 = md[(r + 1) * rs + k * ks];
        const double m2 = md[(r + 2) * rs + k * ks];
        const double m3 = md[(r + 3) * rs + k * ks];
        const double* ip = in.plane(n, k);
        for (std::size_t i = 0; i < len; ++i) {
          const double v = ip[i];
          o0[i] += m0 * v;
          o1[i] += m1 * v;
          o2[i] += m2 * v;
          o3[i] += m3 * v;
        }
      }
    }
    for (; r < rows; ++r) {
      double* o = out.plane(n, r);
      for (std::size_t k = 0; k < inner; ++k) {
        const double m = md[r * rs + k * ks];
        const double* ip = in.plane(n, k);
        for (std::size_t i = 0; i < len; ++i) o[i] += m * ip[i];
      }
    }
  }
}

double plane_dot(const double* a, const double* b, std::size_t len) {
  double s0 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < len; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = f(x[i]);
  return out;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, F f) {
  require_same_shape(a, b, what);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t k, const ConvParams& p) {
  const Index span = static_cast<Index>(in + 2 * p.pad) - static_cast<Index>(p.dilation * (k - 1)) - 1;
  if (k == 0 || span < 0) {
    throw ShapeError("convolution: kernel extent " + std::to_string(p.dilation * (k - 1) + 1) +
                     " exceeds padded input " + std::to_string(in + 2 * p.pad));
  }
  return static_cast<std::size_t>(span) / p.stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvParams& p) {
  const ConvGeometry g = check_conv(x.shape(), w.shape(), p, "conv2d");
  if (!bias.empty() && bias.numel() != g.c_out) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias.numel()) + " entries, expected " +
                     std::to_string(g.c_out));
  }
  Tensor out({g.n, g.c_out, g.oh, g.ow});
  if (!bias.empty()) {
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t co = 0; co < g.c_out; ++co) std::fill_n(out.plane(n, co), g.oh * g.ow, bias[co]);
    }
  }
  if (pointwise(g, p)) {
    plane_matmul(x, out, w.data().data(), g.c_in, 1);
    return out;
  }
  const auto wd = w.data();
  for_each_tap(g, p, [&](std::size_t n, std::size_t co, std::size_t ci, std::size_t widx, std::size_t kh,
                         std::size_t kw) {
    const double wv = wd[widx];
    if (wv == 0.0) return;
    std::size_t lo = 0;
    std::size_t hi = 0;
    tap_range(g.w, g.ow, kw, p, lo, hi);
    if (lo >= hi) return;
    const double* xp = x.plane(n, ci);
    double* op = out.plane(n, co);
    const Index off = static_cast<Index>(kw * p.dilation) - static_cast<Index>(p.pad);
    for (std::size_t oh = 0; oh < g.oh; ++oh) {
      const Index ih = tap_row(oh, kh, g.h, p);
      if (ih < 0) continue;
      const double* xrow = xp + ih * static_cast<Index>(g.w) + off;
      double* orow = op + oh * g.ow;
      if (p.stride == 1) {
        for (std::size_t ow = lo; ow < hi; ++ow) orow[ow] += wv * xrow[ow];
      } else {
        for (std::size_t ow = lo; ow < hi; ++ow) orow[ow] += wv * xrow[ow * p.stride];
      }
    }
  });
  return out;
}

Tensor conv_transpose2d(const Tensor& y, const Tensor& w, const Tensor& bias, const ConvParams& p, std::size_t out_h,
                        std::size_t out_w) {
  const Shape& ys = y.shape();
  const Shape& ws = w.shape();
  if (p.stride == 0 || p.dilation == 0 || p.groups == 0) {
    throw ShapeError("conv_transpose2d: stride, dilation and groups must be >= 1");
  }
  if (ws.h != ws.w) throw ShapeError("conv_transpose2d: kernel must be square, got " + ws.str());
  if (ys.c != ws.n) {
    throw ShapeError("conv_transpose2d: input has " + std::to_string(ys.c) + " channels, weight " + ws.str() +
                     " expects " + std::to_string(ws.n));
  }
  if (ws.n % p.groups != 0) throw ShapeError("conv_transpose2d: groups do not divide input channels");
  const std::size_t k = ws.h;
  const auto natural = [&](std::size_t o) {
    const Index v = static_cast<Index>((o - 1) * p.stride + p.dilation * (k - 1) + 1) - 2 * static_cast<Index>(p.pad);
    if (o == 0 || v <= 0) throw ShapeError("conv_transpose2d: non-positive output extent");
    return static_cast<std::size_t>(v);
  };
  if (out_h == 0) out_h = natural(ys.h);
  if (out_w == 0) out_w = natural(ys.w);
  const Shape xs{ys.n, ws.c * p.groups, out_h, out_w};
  const ConvGeometry g = check_conv(xs, ws, p, "conv_transpose2d");
  if (g.oh != ys.h || g.ow != ys.w) {
    throw ShapeError("conv_transpose2d: output size " + xs.str() + " is not consistent with input " + ys.str());
  }
  if (!bias.empty() && bias.numel() != xs.c) {
    throw ShapeError("conv_transpose2d: bias has " + std::to_string(bias.numel()) + " entries, expected " +
                     std::to_string(xs.c));
  }
  Tensor out(xs);
  if (!bias.empty()) {
    for (std::size_t n = 0; n < xs.n; ++n) {
      for (std::size_t c = 0; c < xs.c; ++c) std::fill_n(out.plane(n, c), out_h * out_w, bias[c]);
    }
  }
  if (pointwise(g, p)) {
    plane_matmul(y, out, w.data().data(), 1, g.c_in);
    return out;
  }
  const auto wd = w.data();
  for_each_tap(g, p, [&](std::size_t n, std::size_t co, std::size_t ci, std::size_t widx, std::size_t kh,
                         std::size_t kw) {
    const double wv = wd[widx];
    if (wv == 0.0) return;
    std::size_t lo = 0;
    std::size_t hi = 0;
    tap_range(g.w, g.ow, kw, p, lo, hi);
    if (lo >= hi) return;
    const double* yp = y.plane(n, co);
    double* xp = out.plane(n, ci);
    const Index off = static_cast<Index>(kw * p.dilation) - static_cast<Index>(p.pad);
    for (std::size_t oh = 0; oh < g.oh; ++oh) {
      const Index ih = tap_row(oh, kh, g.h, p);
      if (ih < 0) continue;
      double* xrow = xp + ih * static_cast<Index>(g.w) + off;
      const double* yrow = yp + oh * g.ow;
      if (p.stride == 1) {
        for (std::size_t ow = lo; ow < hi; ++ow) xrow[ow] += wv * yrow[ow];
      } else {
        for (std::size_t ow = lo; ow < hi; ++ow) xrow[ow * p.stride] += wv * yrow[ow];
      }
    }
  });
  return out;
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& gy, const Shape& w_shape, const ConvParams& p) {
  const ConvGeometry g = check_conv(x.shape(), w_shape, p, "conv2d_weight_grad");
  if (gy.shape() != Shape{g.n, g.c_out, g.oh, g.ow}) {
    throw ShapeError("conv2d_weight_grad: output gradient " + gy.shape().str() + " does not match conv output");
  }
  Tensor gw(w_shape);
  if (pointwise(g, p)) {
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t co = 0; co < g.c_out; ++co) {
        for (std::size_t ci = 0; ci < g.c_in; ++ci) {
          gw[co * g.c_in + ci] += plane_dot(gy.plane(n, co), x.plane(n, ci), g.h * g.w);
        }
      }
    }
    return gw;
  }
  for_each_tap(g, p, [&](std::size_t n, std::size_t co, std::size_t ci, std::size_t widx, std::size_t kh,
                         std::size_t kw) {
    std::size_t lo = 0;
    std::size_t hi = 0;
    tap_range(g.w, g.ow, kw, p, lo, hi);
    if (lo >= hi) return;
    const double* xp = x.plane(n, ci);
    const double* gp = gy.plane(n, co);
    const Index off = static_cast<Index>(kw * p.dilation) - static_cast<Index>(p.pad);
    double acc = 0.0;
    for (std::size_t oh = 0; oh < g.oh; ++oh) {
      const Index ih = tap_row(oh, kh, g.h, p);
      if (ih < 0) continue;
      const double* xrow = xp + ih * static_cast<Index>(g.w) + off;
      const double* grow = gp + oh * g.ow;
      for (std::size_t ow = lo; ow < hi; ++ow) acc += grow[ow] * xrow[ow * p.stride];
    }
    gw[widx] += acc;
  });
  return gw;
}

Tensor conv_transpose2d_weight_grad(const Tensor& y, const Tensor& gx, const Shape& w_shape, const ConvParams& p) {
  // <conv_transpose2d(y, w), gx> = <y, conv2d(gx, w)>, so the weight gradient
  // is the conv2d weight gradient with the roles of input and output swapped.
  return conv2d_weight_grad(gx, y, w_shape, p);
}

Tensor channel_sum(const Tensor& g) {
  const Shape& s = g.shape();
  Tensor out({1, s.c, 1, 1});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* gp = g.plane(n, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) acc += gp[i];
      out[c] += acc;
    }
  }
  return out;
}

void sobel_xy(const Tensor& x, Tensor& gx, Tensor& gy) {
  if (x.shape().c != 1) throw ShapeError("sobel_grad: expected single-channel input, got " + x.shape().str());
  // Written as differences of replicate-padded neighbours so flat regions
  // give exact zeros.
  const Tensor p = pad(x, 1, 1, 1, 1, PadMode::Replicate);
  const Shape& s = x.shape();
  const std::size_t pw = s.w + 2;
  gx = Tensor(s);
  gy = Tensor(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* pp = p.plane(n, 0);
    double* ox = gx.plane(n, 0);
    double* oy = gy.plane(n, 0);
    for (std::size_t i = 0; i < s.h; ++i) {
      const double* r0 = pp + i * pw;
      const double* r1 = r0 + pw;
      const double* r2 = r1 + pw;
      for (std::size_t j = 0; j < s.w; ++j) {
        ox[i * s.w + j] = (r0[j + 2] - r0[j]) + 2.0 * (r1[j + 2] - r1[j]) + (r2[j + 2] - r2[j]);
        oy[i * s.w + j] = (r2[j] - r0[j]) + 2.0 * (r2[j + 1] - r0[j + 1]) + (r2[j + 2] - r0[j + 2]);
      }
    }
  }
}

Tensor sobel_grad(const Tensor& x) {
  Tensor gx;
  Tensor gy;
  sobel_xy(x, gx, gy);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double u, double v) { return u + v; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double u, double v) { return u - v; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double u, double v) { return u * v; });
}
Tensor maximum(const Tensor& a, const Tensor& b) {
  return zip(a, b, "maximum", [](double u, double v) { return std::max(u, v); });
}
Tensor scale(const Tensor& a, double s) {
  return map(a, [s](double v) { return v * s; });
}
Tensor sigmoid(const Tensor& x) {
  return map(x, [](double v) { return sigmoid(v); });
}
Tensor silu(const Tensor& x) {
  return map(x, [](double v) { return v * sigmoid(v); });
}
Tensor tanh(const Tensor& x) {
  return map(x, [](double v) { return std::tanh(v); });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.shape().h != 1 || w.shape().w != 1) throw ShapeError("linear: weight must be [c_out, c_in, 1, 1]");
  return conv2d(x, w, bias, ConvParams{});
}

Tensor layer_norm(const Tensor& x, const Tensor& weight, const Tensor& bias, double eps) {
  const Shape& s = x.shape();
  if (weight.numel() != s.c || bias.numel() != s.c) {
    throw ShapeError("layer_norm: affine parameters must have " + std::to_string(s.c) + " entries");
  }
  Tensor out(s);
  const std::size_t hw = s.plane();
  std::vector<double> mean(hw);
  std::vector<double> var(hw);
  for (std::size_t n = 0; n < s.n; ++n) {
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* xp = x.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) mean[i] += xp[i];
    }
    for (double& m : mean) m /= static_cast<double>(s.c);
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* xp = x.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) {
        const double d = xp[i] - mean[i];
        var[i] += d * d;
      }
    }
    for (double& v : var) v = 1.0 / std::sqrt(v / static_cast<double>(s.c) + eps);
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* xp = x.plane(n, c);
      double* op = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) op[i] = (xp[i] - mean[i]) * var[i] * weight[c] + bias[c];
    }
  }
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  Shape s = parts.front().shape();
  s.c = 0;
  for (const Tensor& t : parts) {
    const Shape& ts = t.shape();
    if (ts.n != s.n || ts.h != s.h || ts.w != s.w) {
      throw ShapeError("concat_channels: incompatible part " + ts.str());
    }
    s.c += ts.c;
  }
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    std::size_t c0 = 0;
    for (const Tensor& t : parts) {
      std::copy_n(t.plane(n, 0), t.shape().c * s.plane(), out.plane(n, c0));
      c0 += t.shape().c;
    }
  }
  return out;
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  const Shape& s = x.shape();
  if (begin + count > s.c) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") exceeds " + std::to_string(s.c) + " channels");
  }
  Tensor out({s.n, count, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) std::copy_n(x.plane(n, begin), count * s.plane(), out.plane(n, 0));
  return out;
}

std::vector<Tensor> split_channels(const Tensor& x, const std::vector<std::size_t>& sizes) {
  std::size_t total = 0;
  for (std::size_t v : sizes) total += v;
  if (total != x.shape().c) {
    throw ShapeError("split_channels: sizes sum to " + std::to_string(total) + " but input has " +
                     std::to_string(x.shape().c) + " channels");
  }
  std::vector<Tensor> out;
  std::size_t begin = 0;
  for (std::size_t v : sizes) {
    out.push_back(slice_channels(x, begin, v));
    begin += v;
  }
  return out;
}

namespace {

Index source_index(Index i, Index extent, PadMode mode) {
  if (i >= 0 && i < extent) return i;
  if (mode == PadMode::Replicate) return std::clamp<Index>(i, 0, extent - 1);
  if (mode == PadMode::Reflect) return i < 0 ? -i : 2 * extent - 2 - i;
  return -1;
}

}  // namespace

Tensor pad(const Tensor& x, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right, PadMode mode) {
  const Shape& s = x.shape();
  if (mode == PadMode::Reflect && (std::max(top, bottom) >= s.h || std::max(left, right) >= s.w)) {
    throw ShapeError("pad: reflect padding must be smaller than the input extent " + s.str());
  }
  if (mode == PadMode::Replicate && (s.h == 0 || s.w == 0)) throw ShapeError("pad: empty input");
  const Shape os{s.n, s.c, s.h + top + bottom, s.w + left + right};
  Tensor out(os);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* xp = x.plane(n, c);
      double* op = out.plane(n, c);
      for (std::size_t r = 0; r < os.h; ++r) {
        const Index sr = source_index(static_cast<Index>(r) - static_cast<Index>(top), static_cast<Index>(s.h), mode);
        if (sr < 0) continue;
        for (std::size_t q = 0; q < os.w; ++q) {
          const Index sq =
              source_index(static_cast<Index>(q) - static_cast<Index>(left), static_cast<Index>(s.w), mode);
          if (sq < 0) continue;
          op[r * os.w + q] = xp[sr * static_cast<Index>(s.w) + sq];
        }
      }
    }
  }
  return out;
}

Tensor pad_adjoint(const Tensor& g, const Shape& in, std::size_t top, std::size_t left, PadMode mode) {
  const Shape& gs = g.shape();
  if (gs.n != in.n || gs.c != in.c || gs.h < in.h || gs.w < in.w) {
    throw ShapeError("pad_adjoint: gradient " + gs.str() + " cannot come from input " + in.str());
  }
  Tensor out(in);
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t c = 0; c < in.c; ++c) {
      const double* gp = g.plane(n, c);
      double* op = out.plane(n, c);
      for (std::size_t r = 0; r < gs.h; ++r) {
        const Index sr = source_index(static_cast<Index>(r) - static_cast<Index>(top), static_cast<Index>(in.h), mode);
        if (sr < 0) continue;
        for (std::size_t q = 0; q < gs.w; ++q) {
          const Index sq =
              source_index(static_cast<Index>(q) - static_cast<Index>(left), static_cast<Index>(in.w), mode);
          if (sq < 0) continue;
          op[sr * static_cast<Index>(in.w) + sq] += gp[r * gs.w + q];
        }
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& x, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  const Shape& s = x.shape();
  if (top + h > s.h || left + w > s.w) throw ShapeError("crop: window exceeds input " + s.str());
  Tensor out({s.n, s.c, h, w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* xp = x.plane(n, c);
      double* op = out.plane(n, c);
      for (std::size_t r = 0; r < h; ++r) std::copy_n(xp + (top + r) * s.w + left, w, op + r * w);
    }
  }
  return out;
}

}  // namespace adasf
