#include "adasf/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "adasf/losses.hpp"
#include "adasf/ops.hpp"

namespace adasf {

namespace {

using Levels = std::vector<int>;

int level(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<int>(std::lround(255.0 * c));
}

void check_single(const Tensor& x, const char* what) {
  if (x.shape().c != 1 || x.empty()) {
    throw ShapeError(std::string(what) + ": expected non-empty [n,1,h,w], got " + x.shape().str());
  }
}

void check_same(const Tensor& a, const Tensor& b, const char* what) {
  check_single(a, what);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes differ, " + a.shape().str() + " vs " + b.shape().str());
  }
}

Levels levels_of(const Tensor& x, std::size_t n) {
  const std::size_t hw = x.shape().plane();
  const double* p = x.plane(n, 0);
  Levels out(hw);
  for (std::size_t i = 0; i < hw; ++i) out[i] = level(p[i]);
  return out;
}

template <class F>
double mean_over_batch(const Tensor& x, F per_image) {
  double acc = 0.0;
  for (std::size_t n = 0; n < x.shape().n; ++n) acc += per_image(n);
  return acc / static_cast<double>(x.shape().n);
}

double entropy_of(const Levels& v) {
  std::array<double, 256> hist{};
  for (int l : v) hist[static_cast<std::size_t>(l)] += 1.0;
  const double total = static_cast<double>(v.size());
  double e = 0.0;
  for (double c : hist) {
    if (c > 0.0) {
      const double p = c / total;
      e -= p * std::log2(p);
    }
  }
  return e;
}

double mi_of(const Levels& x, const Levels& y) {
  std::vector<double> joint(256 * 256, 0.0);
  std::array<double, 256> px{};
  std::array<double, 256> py{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[static_cast<std::size_t>(x[i]) * 256 + static_cast<std::size_t>(y[i])] += 1.0;
    px[static_cast<std::size_t>(x[i])] += 1.0;
    py[static_cast<std::size_t>(y[i])] += 1.0;
  }
  const double total = static_cast<double>(x.size());
  double mi = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    if (px[i] == 0.0) continue;
    for (std::size_t j = 0; j < 256; ++j) {
      const double c = joint[i * 256 + j];
      if (c > 0.0) mi += c / total * std::log2(c * total / (px[i] * py[j]));
    }
  }
  return mi;
}

double pearson(const std::vector<double>& u, const std::vector<double>& v) {
  const double n = static_cast<double>(u.size());
  double mu = 0.0;
  double mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= n;
  mv /= n;
  double suv = 0.0;
  double suu = 0.0;
  double svv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suv += (u[i] - mu) * (v[i] - mv);
    suu += (u[i] - mu) * (u[i] - mu);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  if (suu == 0.0 || svv == 0.0) return 0.0;
  return suv / std::sqrt(suu * svv);
}

struct EdgeMap {
  std::vector<double> g;
  std::vector<double> a;
};

EdgeMap edges(const Levels& v, std::size_t h, std::size_t w) {
  Tensor t({1, 1, h, w});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = v[i];
  Tensor sx;
  Tensor sy;
  sobel_xy(t, sx, sy);
  EdgeMap e{std::vector<double>(v.size()), std::vector<double>(v.size())};
  for (std::size_t i = 0; i < v.size(); ++i) {
    e.g[i] = std::sqrt(sx[i] * sx[i] + sy[i] * sy[i]);
    e.a[i] = sx[i] == 0.0 ? std::numbers::pi / 2 : std::atan(sy[i] / sx[i]);
  }
  return e;
}

// Per-pixel preservation of the source edges in the fused image.
std::vector<double> preservation(const EdgeMap& src, const EdgeMap& fused) {
  using K = QabfConstants;
  std::vector<double> q(src.g.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double gs = src.g[i];
    const double gf = fused.g[i];
    double g = 0.0;
    if (gs > gf) {
      g = gf / gs;
    } else if (gf > gs) {
      g = gs / gf;
    } else if (gs > 0.0) {
      g = 1.0;
    }
    const double a = 1.0 - std::abs(src.a[i] - fused.a[i]) / (std::numbers::pi / 2);
    const double qg = K::gamma_g / (1.0 + std::exp(K::kappa_g * (g - K::sigma_g)));
    const double qa = K::gamma_a / (1.0 + std::exp(K::kappa_a * (a - K::sigma_a)));
    q[i] = qg * qa;
  }
  return q;
}

}  // namespace

Tensor quantize8(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = level(x[i]) / 255.0;
  return out;
}

double entropy(const Tensor& x) {
  check_single(x, "entropy");
  return mean_over_batch(x, [&](std::size_t n) { return entropy_of(levels_of(x, n)); });
}

double std_dev(const Tensor& x) {
  check_single(x, "std_dev");
  return mean_over_batch(x, [&](std::size_t n) {
    const Levels v = levels_of(x, n);
    double m = 0.0;
    for (int l : v) m += l;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (int l : v) s += (l - m) * (l - m);
    return std::sqrt(s / static_cast<double>(v.size()));
  });
}

double spatial_frequency(const Tensor& x) {
  check_single(x, "spatial_frequency");
  const std::size_t h = x.shape().h;
  const std::size_t w = x.shape().w;
  return mean_over_batch(x, [&](std::size_t n) {
    const Levels v = levels_of(x, n);
    double rf = 0.0;
    double cf = 0.0;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 1; j < w; ++j) {
        const double d = v[i * w + j] - v[i * w + j - 1];
        rf += d * d;
      }
    for (std::size_t i = 1; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const double d = v[i * w + j] - v[(i - 1) * w + j];
        cf += d * d;
      }
    rf = w > 1 ? rf / static_cast<double>(h * (w - 1)) : 0.0;
    cf = h > 1 ? cf / static_cast<double>((h - 1) * w) : 0.0;
    return std::sqrt(rf + cf);
  });
}

double mutual_information_pair(const Tensor& x, const Tensor& y) {
  check_same(x, y, "mutual_information");
  return mean_over_batch(x, [&](std::size_t n) { return mi_of(levels_of(x, n), levels_of(y, n)); });
}

double mutual_information(const Tensor& f, const Tensor& a, const Tensor& b) {
  return mutual_information_pair(f, a) + mutual_information_pair(f, b);
}

double scd(const Tensor& f, const Tensor& a, const Tensor& b) {
  check_same(f, a, "scd");
  check_same(f, b, "scd");
  return mean_over_batch(f, [&](std::size_t n) {
    const Levels lf = levels_of(f, n);
    const Levels la = levels_of(a, n);
    const Levels lb = levels_of(b, n);
    std::vector<double> fb(lf.size());
    std::vector<double> fa(lf.size());
    std::vector<double> va(lf.size());
    std::vector<double> vb(lf.size());
    for (std::size_t i = 0; i < lf.size(); ++i) {
      fb[i] = lf[i] - lb[i];
      fa[i] = lf[i] - la[i];
      va[i] = la[i];
      vb[i] = lb[i];
    }
    return pearson(fb, va) + pearson(fa, vb);
  });
}

double qabf(const Tensor& f, const Tensor& a, const Tensor& b) {
  check_same(f, a, "qabf");
  check_same(f, b, "qabf");
  const std::size_t h = f.shape().h;
  const std::size_t w = f.shape().w;
  return mean_over_batch(f, [&](std::size_t n) {
    const EdgeMap ef = edges(levels_of(f, n), h, w);
    const EdgeMap ea = edges(levels_of(a, n), h, w);
    const EdgeMap eb = edges(levels_of(b, n), h, w);
    const std::vector<double> qa = preservation(ea, ef);
    const std::vector<double> qb = preservation(eb, ef);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < qa.size(); ++i) {
      num += qa[i] * ea.g[i] + qb[i] * eb.g[i];
      den += ea.g[i] + eb.g[i];
    }
    return den > 0.0 ? num / den : 0.0;
  });
}

double ssim_metric(const Tensor& f, const Tensor& a, const Tensor& b) {
  const Tensor qf = quantize8(f);
  return ssim_index(qf, quantize8(a)) + ssim_index(qf, quantize8(b));
}

MetricReport compute_metrics(const Tensor& f, const Tensor& a, const Tensor& b) {
  MetricReport r;
  r.en = entropy(f);
  r.sd = std_dev(f);
  r.sf = spatial_frequency(f);
  r.mi = mutual_information(f, a, b);
  r.scd = scd(f, a, b);
  r.qabf = qabf(f, a, b);
  r.ssim = ssim_metric(f, a, b);
  return r;
}

MetricReport mean_report(const std::vector<MetricReport>& reports) {
  MetricReport m;
  if (reports.empty()) return m;
  for (const MetricReport& r : reports) {
    m.en += r.en;
    m.sd += r.sd;
    m.sf += r.sf;
    m.mi += r.mi;
    m.scd += r.scd;
    m.qabf += r.qabf;
    m.ssim += r.ssim;
  }
  const double k = 1.0 / static_cast<double>(reports.size());
  m.en *= k;
  m.sd *= k;
  m.sf *= k;
  m.mi *= k;
  m.scd *= k;
  m.qabf *= k;
  m.ssim *= k;
  return m;
}

}  // namespace adasf
