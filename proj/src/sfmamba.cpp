#include "adasf/sfmamba.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adasf/fft.hpp"
#include "adasf/ops.hpp"

namespace adasf {

SsdBlockParams SsdBlockParams::create(const std::string& prefix, std::size_t channels, std::size_t c_prime,
                                      std::size_t groups, std::size_t d_state, std::size_t mlp_ratio,
                                      std::mt19937_64& rng) {
  if (channels == 0 || c_prime == 0 || groups == 0 || d_state == 0 || mlp_ratio == 0) {
    throw ShapeError("SsdBlockParams: all widths must be positive");
  }
  if (c_prime % groups != 0) {
    throw ShapeError("SsdBlockParams: C' = " + std::to_string(c_prime) + " not divisible by G = " +
                     std::to_string(groups));
  }
  SsdBlockParams p;
  p.channels = channels;
  p.c_prime = c_prime;
  p.groups = groups;
  p.d_state = d_state;
  p.hidden = mlp_ratio * channels;
  const std::size_t pw = p.proj_width();
  const auto name = [&prefix](const char* leaf) { return prefix + "." + leaf; };
  p.norm1_w = Parameter(name("norm1.w"), Tensor({1, channels, 1, 1}, 1.0));
  p.norm1_b = Parameter(name("norm1.b"), Tensor({1, channels, 1, 1}));
  p.w_in = Parameter(name("w_in"), fan_in_uniform({pw, channels, 1, 1}, channels, rng));
  p.b_in = Parameter(name("b_in"), fan_in_uniform({1, pw, 1, 1}, channels, rng));
  p.w_se = Parameter(name("w_se"), fan_in_uniform({pw, 1, 3, 3}, 9, rng));
  p.b_se = Parameter(name("b_se"), fan_in_uniform({1, pw, 1, 1}, 9, rng));
  p.lambda_raw = Parameter(name("lambda_raw"), Tensor({1, 1, 1, 1}, -3.0));
  p.w_gate = Parameter(name("w_gate"), fan_in_uniform({c_prime, channels, 1, 1}, channels, rng));
  p.b_gate = Parameter(name("b_gate"), fan_in_uniform({1, c_prime, 1, 1}, channels, rng));
  p.w_out = Parameter(name("w_out"), Tensor({channels, c_prime, 1, 1}));
  p.b_out = Parameter(name("b_out"), Tensor({1, channels, 1, 1}));
  p.norm2_w = Parameter(name("norm2.w"), Tensor({1, channels, 1, 1}, 1.0));
  p.norm2_b = Parameter(name("norm2.b"), Tensor({1, channels, 1, 1}));
  p.mlp_w1 = Parameter(name("mlp.w1"), fan_in_uniform({p.hidden, channels, 1, 1}, channels, rng));
  p.mlp_b1 = Parameter(name("mlp.b1"), fan_in_uniform({1, p.hidden, 1, 1}, channels, rng));
  p.mlp_w2 = Parameter(name("mlp.w2"), Tensor({channels, p.hidden, 1, 1}));
  p.mlp_b2 = Parameter(name("mlp.b2"), Tensor({1, channels, 1, 1}));
  return p;
}

double SsdBlockParams::lambda() const { return sigmoid(lambda_raw.value.item()); }

std::vector<Parameter*> SsdBlockParams::parameters() {
  return {&norm1_w, &norm1_b, &w_in,  &b_in,    &w_se,    &b_se,   &lambda_raw, &w_gate, &b_gate,
          &w_out,   &b_out,   &norm2_w, &norm2_b, &mlp_w1, &mlp_b1, &mlp_w2,     &mlp_b2};
}

// ---------------------------------------------------------------------------
// Spatial branch

Tensor spatial_branch(const Tensor& lp, const Tensor& w_se, const Tensor& b_se) {
  ad::Tape tape(false);
  return spatial_branch(tape.constant(lp), tape.constant(w_se), tape.constant(b_se)).value();
}

ad::Var spatial_branch(const ad::Var& lp, const ad::Var& w_se, const ad::Var& b_se) {
  const std::size_t c = lp.shape().c;
  if (w_se.shape() != Shape{c, 1, 3, 3}) {
    throw ShapeError("spatial_branch: w_se must be " + Shape{c, 1, 3, 3}.str() + ", got " + w_se.shape().str());
  }
  const ConvParams cp{.stride = 1, .dilation = 1, .groups = c, .pad = 1};
  return ad::silu(ad::conv2d(lp, w_se, b_se, cp));
}

// ---------------------------------------------------------------------------
// Frequency branch

namespace {

struct MaskedSpectrum {
  Spectrum z;
  std::vector<double> power;  // |Z|^2 averaged with the mirrored bin
  std::vector<double> mask;
  std::vector<double> plane_max;
  std::vector<std::size_t> argmax;  // flat index of the max bin per plane
};

MaskedSpectrum apply_mask(const Tensor& lp, double lambda, MaskMode mode, double k_sharp) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("freq_branch: threshold must lie in (0,1], got " + std::to_string(lambda));
  }
  const Shape s = lp.shape();
  MaskedSpectrum ms;
  ms.z = fft2(lp);
  const std::size_t planes = s.n * s.c;
  const std::size_t hw = s.plane();
  ms.power.assign(s.numel(), 0.0);
  ms.mask.assign(s.numel(), 0.0);
  ms.plane_max.assign(planes, 0.0);
  ms.argmax.assign(planes, 0);
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const std::size_t base = pl * hw;
    for (std::size_t u = 0; u < s.h; ++u) {
      for (std::size_t v = 0; v < s.w; ++v) {
        const std::size_t k = base + u * s.w + v;
        const std::size_t km = base + ((s.h - u) % s.h) * s.w + (s.w - v) % s.w;
        const double pk = ms.z.re[k] * ms.z.re[k] + ms.z.im[k] * ms.z.im[k];
        const double pm = ms.z.re[km] * ms.z.re[km] + ms.z.im[km] * ms.z.im[km];
        // Mirrored bins of a real plane have equal power; averaging keeps the
        // mask exactly conjugate-symmetric under rounding.
        ms.power[k] = 0.5 * (pk + pm);
      }
    }
    double m = 0.0;
    std::size_t arg = base;
    for (std::size_t k = base; k < base + hw; ++k) {
      if (ms.power[k] > m) {
        m = ms.power[k];
        arg = k;
      }
    }
    ms.plane_max[pl] = m;
    ms.argmax[pl] = arg;
    for (std::size_t k = base; k < base + hw; ++k) {
      const double p = m > 0.0 ? ms.power[k] / m : 0.0;
      ms.mask[k] = mode == MaskMode::Hard ? (p >= lambda ? 1.0 : 0.0) : sigmoid(k_sharp * (p - lambda));
    }
  }
  return ms;
}

Tensor masked_inverse(const MaskedSpectrum& ms) {
  Spectrum w = ms.z;
  for (std::size_t k = 0; k < w.re.size(); ++k) {
    w.re[k] *= ms.mask[k];
    w.im[k] *= ms.mask[k];
  }
  const Spectrum y = ifft2_complex(w);
  double re_max = 0.0;
  double im_max = 0.0;
  for (std::size_t k = 0; k < y.re.size(); ++k) {
    re_max = std::max(re_max, std::abs(y.re[k]));
    im_max = std::max(im_max, std::abs(y.im[k]));
  }
  if (im_max > 1e-8 * re_max && im_max > 1e-12) {
    throw std::runtime_error("freq_branch: masked spectrum lost conjugate symmetry (imaginary residue " +
                             std::to_string(im_max) + ")");
  }
  Tensor out(y.shape, y.re);
  return out;
}

}  // namespace

Tensor freq_branch(const Tensor& lp, double lambda, MaskMode mode, double k_sharp) {
  return masked_inverse(apply_mask(lp, lambda, mode, k_sharp));
}

ad::Var freq_branch(const ad::Var& lp, const ad::Var& lambda, MaskMode mode, double k_sharp) {
  if (lambda.value().numel() != 1) throw ShapeError("freq_branch: threshold must be a scalar");
  const double lam = lambda.value().item();
  auto ms = std::make_shared<MaskedSpectrum>(apply_mask(lp.value(), lam, mode, k_sharp));
  Tensor y = masked_inverse(*ms);
  auto px = lp.node();
  auto pl = lambda.node();
  const Shape s = lp.shape();
  return ad::make_op({lp, lambda}, std::move(y), [ms, px, pl, mode, k_sharp, s](const Tensor& gy) {
    const Spectrum gspec = fft2(gy);
    Spectrum g(s);
    double dlam = 0.0;
    const std::size_t hw = s.plane();
    for (std::size_t plane = 0; plane < s.n * s.c; ++plane) {
      const std::size_t base = plane * hw;
      const double m_max = ms->plane_max[plane];
      double weighted = 0.0;
      for (std::size_t k = base; k < base + hw; ++k) {
        const double mk = ms->mask[k];
        g.re[k] = gspec.re[k] * mk;
        g.im[k] = gspec.im[k] * mk;
        if (mode == MaskMode::Hard) continue;
        const double r =
            (gspec.re[k] * ms->z.re[k] + gspec.im[k] * ms->z.im[k]) * mk * (1.0 - mk) * k_sharp;
        dlam -= r;
        if (m_max > 0.0) {
          g.re[k] += 2.0 * r * ms->z.re[k] / m_max;
          g.im[k] += 2.0 * r * ms->z.im[k] / m_max;
          weighted += r * ms->power[k];
        }
      }
      if (mode == MaskMode::Soft && m_max > 0.0) {
        const std::size_t ka = ms->argmax[plane];
        const double f = -2.0 * weighted / (m_max * m_max);
        g.re[ka] += f * ms->z.re[ka];
        g.im[ka] += f * ms->z.im[ka];
      }
    }
    if (px->requires_grad) px->accumulate(ifft2(g));
    if (pl->requires_grad) pl->accumulate(Tensor(pl->value.shape(), dlam));
  });
}

// ---------------------------------------------------------------------------
// Split

namespace {

void check_split(const Shape& s, std::size_t c_prime, std::size_t groups, std::size_t d_state) {
  if (s.c != 2 * c_prime + 2 * groups * d_state) {
    throw ShapeError("split_xbca: expected " + std::to_string(2 * c_prime + 2 * groups * d_state) +
                     " channels (2C' + 2Gd), got " + s.str());
  }
}

}  // namespace

XBCA split_xbca(const Tensor& ls, const Tensor& lt, std::size_t c_prime, std::size_t groups, std::size_t d_state) {
  ad::Tape tape(false);
  const XBCAVars v = split_xbca(tape.constant(ls), tape.constant(lt), c_prime, groups, d_state);
  return {v.x.value(), v.b.value(), v.c.value(), v.a.value()};
}

XBCAVars split_xbca(const ad::Var& ls, const ad::Var& lt, std::size_t c_prime, std::size_t groups,
                    std::size_t d_state) {
  check_split(ls.shape(), c_prime, groups, d_state);
  require_same_shape(ls.value(), lt.value(), "split_xbca");
  const ad::Var fused = ad::add(ls, lt);
  const std::size_t gd = groups * d_state;
  return {ad::slice_channels(fused, 0, c_prime), ad::slice_channels(fused, c_prime, gd),
          ad::slice_channels(fused, c_prime + gd, gd), ad::sigmoid(ad::slice_channels(fused, c_prime + 2 * gd, c_prime))};
}

// ---------------------------------------------------------------------------
// 2-D SSD scan

namespace {

struct ScanGeometry {
  std::size_t lines;
  std::size_t len;
  std::size_t h;
  std::size_t w;
  ScanDir dir;

  ScanGeometry(ScanDir d, std::size_t hh, std::size_t ww)
      : lines(d == ScanDir::LR || d == ScanDir::RL ? hh : ww),
        len(d == ScanDir::LR || d == ScanDir::RL ? ww : hh),
        h(hh),
        w(ww),
        dir(d) {}

  [[nodiscard]] std::size_t pos(std::size_t line, std::size_t t) const {
    switch (dir) {
      case ScanDir::LR: return line * w + t;
      case ScanDir::RL: return line * w + (len - 1 - t);
      case ScanDir::TB: return t * w + line;
      case ScanDir::BT: return (len - 1 - t) * w + line;
    }
    return 0;
  }
};

void check_scan(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c, std::size_t groups,
                const std::vector<ScanDir>& dirs) {
  const Shape& xs = x.shape();
  if (a.shape() != xs) throw ShapeError("ssd2d_scan: A " + a.shape().str() + " must match X " + xs.str());
  if (b.shape() != c.shape()) throw ShapeError("ssd2d_scan: B " + b.shape().str() + " and C " + c.shape().str() + " differ");
  const Shape& bs = b.shape();
  if (bs.n != xs.n || bs.h != xs.h || bs.w != xs.w) {
    throw ShapeError("ssd2d_scan: B/C " + bs.str() + " do not match X " + xs.str());
  }
  if (groups == 0 || xs.c % groups != 0 || bs.c % groups != 0 || bs.c == 0) {
    throw ShapeError("ssd2d_scan: group count " + std::to_string(groups) + " must divide X channels " +
                     std::to_string(xs.c) + " and B/C channels " + std::to_string(bs.c));
  }
  if (dirs.empty()) throw std::invalid_argument("ssd2d_scan: no scan directions given");
}

struct ScanGrads {
  Tensor gx;
  Tensor ga;
  Tensor gb;
  Tensor gc;
};

// Copies d planes of `src` starting at channel c0 into position-major [hw][d].
void pack_states(const Tensor& src, std::size_t n, std::size_t c0, std::size_t d, std::vector<double>& dst) {
  const std::size_t hw = src.shape().plane();
  dst.resize(hw * d);
  for (std::size_t k = 0; k < d; ++k) {
    const double* pl = src.plane(n, c0 + k);
    for (std::size_t p = 0; p < hw; ++p) dst[p * d + k] = pl[p];
  }
}

void unpack_add(const std::vector<double>& src, Tensor& dst, std::size_t n, std::size_t c0, std::size_t d) {
  const std::size_t hw = dst.shape().plane();
  for (std::size_t k = 0; k < d; ++k) {
    double* pl = dst.plane(n, c0 + k);
    for (std::size_t p = 0; p < hw; ++p) pl[p] += src[p * d + k];
  }
}

Tensor scan_forward(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c, std::size_t groups,
                    const std::vector<ScanDir>& dirs) {
  const Shape s = x.shape();
  const std::size_t d = b.shape().c / groups;
  const std::size_t cpg = s.c / groups;
  const double wdir = 1.0 / static_cast<double>(dirs.size());
  Tensor y(s);
  std::vector<double> h(d);
  std::vector<double> bt;
  std::vector<double> ct;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t g = 0; g < groups; ++g) {
      pack_states(b, n, g * d, d, bt);
      pack_states(c, n, g * d, d, ct);
      for (std::size_t ch = g * cpg; ch < (g + 1) * cpg; ++ch) {
        const double* xp = x.plane(n, ch);
        const double* ap = a.plane(n, ch);
        double* yp = y.plane(n, ch);
        for (ScanDir dir : dirs) {
          const ScanGeometry geo(dir, s.h, s.w);
          for (std::size_t line = 0; line < geo.lines; ++line) {
            std::fill(h.begin(), h.end(), 0.0);
            for (std::size_t t = 0; t < geo.len; ++t) {
              const std::size_t p = geo.pos(line, t);
              const double av = ap[p];
              const double xv = xp[p];
              const double* bk = &bt[p * d];
              const double* ck = &ct[p * d];
              double acc = 0.0;
              for (std::size_t k = 0; k < d; ++k) {
                h[k] = av * h[k] + bk[k] * xv;
                acc += ck[k] * h[k];
              }
              yp[p] += wdir * acc;
            }
          }
        }
      }
    }
  }
  return y;
}

ScanGrads scan_backward(const Tensor& gy, const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c,
                        std::size_t groups, const std::vector<ScanDir>& dirs) {
  const Shape s = x.shape();
  const std::size_t d = b.shape().c / groups;
  const std::size_t cpg = s.c / groups;
  const std::size_t hw = s.plane();
  const double wdir = 1.0 / static_cast<double>(dirs.size());
  ScanGrads out{Tensor(s), Tensor(s), Tensor(b.shape()), Tensor(c.shape())};
  std::vector<double> states;
  std::vector<double> carry(d);
  std::vector<double> bt;
  std::vector<double> ct;
  std::vector<double> gbt;
  std::vector<double> gct;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t g = 0; g < groups; ++g) {
      pack_states(b, n, g * d, d, bt);
      pack_states(c, n, g * d, d, ct);
      gbt.assign(hw * d, 0.0);
      gct.assign(hw * d, 0.0);
      for (std::size_t ch = g * cpg; ch < (g + 1) * cpg; ++ch) {
        const double* xp = x.plane(n, ch);
        const double* ap = a.plane(n, ch);
        const double* gyp = gy.plane(n, ch);
        double* gxp = out.gx.plane(n, ch);
        double* gap = out.ga.plane(n, ch);
        for (ScanDir dir : dirs) {
          const ScanGeometry geo(dir, s.h, s.w);
          states.assign((geo.len + 1) * d, 0.0);
          for (std::size_t line = 0; line < geo.lines; ++line) {
            // Recompute the line's states; states[t+1] is h after position t.
            for (std::size_t t = 0; t < geo.len; ++t) {
              const std::size_t p = geo.pos(line, t);
              const double av = ap[p];
              const double xv = xp[p];
              const double* bk = &bt[p * d];
              const double* prev = &states[t * d];
              double* cur = &states[(t + 1) * d];
              for (std::size_t k = 0; k < d; ++k) cur[k] = av * prev[k] + bk[k] * xv;
            }
            std::fill(carry.begin(), carry.end(), 0.0);
            for (std::size_t t = geo.len; t-- > 0;) {
              const std::size_t p = geo.pos(line, t);
              const double gv = wdir * gyp[p];
              const double av = ap[p];
              const double xv = xp[p];
              const double* prev = &states[t * d];
              const double* cur = &states[(t + 1) * d];
              const double* bk = &bt[p * d];
              const double* ck = &ct[p * d];
              double* gbk = &gbt[p * d];
              double* gck = &gct[p * d];
              double gx_acc = 0.0;
              double ga_acc = 0.0;
              for (std::size_t k = 0; k < d; ++k) {
                const double delta = gv * ck[k] + carry[k];
                gck[k] += gv * cur[k];
                gbk[k] += delta * xv;
                gx_acc += delta * bk[k];
                ga_acc += delta * prev[k];
                carry[k] = av * delta;
              }
              gxp[p] += gx_acc;
              gap[p] += ga_acc;
            }
          }
        }
      }
      unpack_add(gbt, out.gb, n, g * d, d);
      unpack_add(gct, out.gc, n, g * d, d);
    }
  }
  return out;
}

}  // namespace

Tensor ssd2d_scan(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c, std::size_t groups,
                  const std::vector<ScanDir>& dirs) {
  check_scan(x, a, b, c, groups, dirs);
  return scan_forward(x, a, b, c, groups, dirs);
}

ad::Var ssd2d_scan(const ad::Var& x, const ad::Var& a, const ad::Var& b, const ad::Var& c, std::size_t groups,
                   const std::vector<ScanDir>& dirs) {
  check_scan(x.value(), a.value(), b.value(), c.value(), groups, dirs);
  Tensor y = scan_forward(x.value(), a.value(), b.value(), c.value(), groups, dirs);
  auto nx = x.node();
  auto na = a.node();
  auto nb = b.node();
  auto nc = c.node();
  return ad::make_op({x, a, b, c}, std::move(y), [nx, na, nb, nc, groups, dirs](const Tensor& gy) {
    ScanGrads g = scan_backward(gy, nx->value, na->value, nb->value, nc->value, groups, dirs);
    if (nx->requires_grad) nx->accumulate(g.gx);
    if (na->requires_grad) na->accumulate(g.ga);
    if (nb->requires_grad) nb->accumulate(g.gb);
    if (nc->requires_grad) nc->accumulate(g.gc);
  });
}

// ---------------------------------------------------------------------------
// Block

ad::Var block_forward(ad::Tape& tape, const ad::Var& l_in, SsdBlockParams& p, const BlockOptions& opt) {
  if (l_in.shape().c != p.channels) {
    throw ShapeError("block_forward: expected " + std::to_string(p.channels) + " channels, got " +
                     l_in.shape().str());
  }
  const ad::Var u = ad::layer_norm(l_in, tape.param(p.norm1_w), tape.param(p.norm1_b));
  const ad::Var lp = ad::linear(u, tape.param(p.w_in), tape.param(p.b_in));
  const ad::Var ls = spatial_branch(lp, tape.param(p.w_se), tape.param(p.b_se));
  const ad::Var lam = ad::sigmoid(tape.param(p.lambda_raw));
  const ad::Var lt = freq_branch(lp, lam, opt.mask, opt.k_sharp);
  const XBCAVars parts = split_xbca(ls, lt, p.c_prime, p.groups, p.d_state);
  const ad::Var y = ssd2d_scan(parts.x, parts.a, parts.b, parts.c, p.groups, opt.dirs);
  const ad::Var gate = ad::silu(ad::linear(u, tape.param(p.w_gate), tape.param(p.b_gate)));
  const ad::Var l_mid = ad::add(l_in, ad::linear(ad::mul(y, gate), tape.param(p.w_out), tape.param(p.b_out)));
  const ad::Var v = ad::layer_norm(l_mid, tape.param(p.norm2_w), tape.param(p.norm2_b));
  const ad::Var hidden = ad::silu(ad::linear(v, tape.param(p.mlp_w1), tape.param(p.mlp_b1)));
  return ad::add(l_mid, ad::linear(hidden, tape.param(p.mlp_w2), tape.param(p.mlp_b2)));
}

Tensor block_forward(const Tensor& l_in, SsdBlockParams& p, const BlockOptions& opt) {
  ad::Tape tape(false);
  return block_forward(tape, tape.constant(l_in), p, opt).value();
}

}  // namespace adasf
