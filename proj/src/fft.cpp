#include "adasf/fft.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace adasf {

using cplx = std::complex<double>;

struct FftPlan::Bluestein {
  std::size_t m = 0;
  FftPlan inner;
  std::vector<cplx> chirp;      // exp(-i pi k^2 / n)
  std::vector<cplx> kernel_ft;  // FFT of the conjugate chirp, circularly extended

  Bluestein(std::size_t n, std::size_t m_) : m(m_), inner(m_), chirp(n), kernel_ft(m_) {
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the phase argument small and exact.
      const std::size_t k2 = (k * k) % (2 * n);
      chirp[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n));
    }
    kernel_ft[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
      kernel_ft[k] = std::conj(chirp[k]);
      kernel_ft[m - k] = std::conj(chirp[k]);
    }
    inner.forward(kernel_ft);
  }
};

namespace {

std::vector<std::size_t> factorize(std::size_t n, bool& smooth) {
  std::vector<std::size_t> f;
  smooth = true;
  while (n % 4 == 0) {
    f.push_back(4);
    n /= 4;
  }
  for (std::size_t p : {2u, 3u, 5u, 7u}) {
    while (n % p == 0) {
      f.push_back(p);
      n /= p;
    }
  }
  if (n != 1) smooth = false;
  return f;
}

}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw ShapeError("FftPlan: length must be positive");
  bool smooth = false;
  factors_ = factorize(n, smooth);
  if (!smooth) {
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    factors_.clear();
    bluestein_ = std::make_unique<Bluestein>(n, m);
    return;
  }
  twiddles_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    twiddles_[j] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n));
  }
}

FftPlan::~FftPlan() = default;
FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

namespace {

// Plain complex product; std::complex's operator* takes a slow NaN-recovery path.
inline cplx cmul(cplx a, cplx b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

}  // namespace

void FftPlan::mixed_radix(const cplx* in, cplx* out, std::size_t n, std::size_t stride, std::size_t level,
                          bool inverse) const {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = factors_[level];
  const std::size_t m = n / p;
  if (m == 1) {
    for (std::size_t r = 0; r < p; ++r) out[r] = in[r * stride];
  } else {
    for (std::size_t r = 0; r < p; ++r) mixed_radix(in + r * stride, out + r * m, m, stride * p, level + 1, inverse);
  }

  const std::size_t tw_step = n_ / n;
  const auto twiddle = [&](std::size_t idx) {
    const cplx w = twiddles_[idx];
    return inverse ? std::conj(w) : w;
  };
  if (p == 2) {
    for (std::size_t k = 0; k < m; ++k) {
      const cplx a = out[k];
      const cplx b = cmul(out[m + k], twiddle(k * tw_step));
      out[k] = a + b;
      out[m + k] = a - b;
    }
    return;
  }
  if (p == 4) {
    // -i for the forward transform, +i for the inverse.
    const double sgn = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < m; ++k) {
      const cplx a0 = out[k];
      const cplx a1 = cmul(out[m + k], twiddle(k * tw_step));
      const cplx a2 = cmul(out[2 * m + k], twiddle(2 * k * tw_step));
      const cplx a3 = cmul(out[3 * m + k], twiddle(3 * k * tw_step));
      const cplx s02 = a0 + a2;
      const cplx d02 = a0 - a2;
      const cplx s13 = a1 + a3;
      const cplx d13 = a1 - a3;
      const cplx rot{-sgn * d13.imag(), sgn * d13.real()};
      out[k] = s02 + s13;
      out[m + k] = d02 + rot;
      out[2 * m + k] = s02 - s13;
      out[3 * m + k] = d02 - rot;
    }
    return;
  }
  const std::size_t root_step = n_ / p;
  std::array<cplx, 7> t{};
  std::array<cplx, 7> roots{};
  for (std::size_t j = 0; j < p; ++j) roots[j] = twiddle(j * root_step);
  for (std::size_t k = 0; k < m; ++k) {
    // r * k * tw_step < p * m * tw_step = n_, so no wraparound.
    for (std::size_t r = 0; r < p; ++r) t[r] = cmul(out[r * m + k], twiddle(r * k * tw_step));
    for (std::size_t q = 0; q < p; ++q) {
      cplx acc = t[0];
      std::size_t idx = 0;
      for (std::size_t r = 1; r < p; ++r) {
        idx += q;
        if (idx >= p) idx -= p;
        acc += cmul(t[r], roots[idx]);
      }
      out[q * m + k] = acc;
    }
  }
}

void FftPlan::run(std::span<cplx> data, bool inverse) const {
  if (data.size() != n_) throw ShapeError("FftPlan: buffer length does not match plan length");
  if (bluestein_) {
    const Bluestein& b = *bluestein_;
    std::vector<cplx> a(b.m, cplx{});
    for (std::size_t k = 0; k < n_; ++k) {
      const cplx x = inverse ? std::conj(data[k]) : data[k];
      a[k] = cmul(x, b.chirp[k]);
    }
    b.inner.forward(a);
    for (std::size_t k = 0; k < b.m; ++k) a[k] = cmul(a[k], b.kernel_ft[k]);
    b.inner.inverse(a);
    const double inv_m = 1.0 / static_cast<double>(b.m);
    for (std::size_t k = 0; k < n_; ++k) {
      const cplx y = cmul(a[k] * inv_m, b.chirp[k]);
      data[k] = inverse ? std::conj(y) : y;
    }
    return;
  }
  thread_local std::vector<cplx> in;
  in.assign(data.begin(), data.end());
  mixed_radix(in.data(), data.data(), n_, 1, 0, inverse);
}

namespace {

// Transforms every plane of `s` in place along rows then columns.
void transform_planes(Spectrum& s, bool inverse) {
  const Shape& sh = s.shape;
  if (sh.numel() == 0) return;
  const FftPlan row_plan(sh.w);
  const FftPlan col_plan(sh.h);
  const double norm = 1.0 / std::sqrt(static_cast<double>(sh.h * sh.w));
  std::vector<cplx> buf(std::max(sh.h, sh.w));
  const std::size_t planes = sh.n * sh.c;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    double* re = s.re.data() + pl * sh.plane();
    double* im = s.im.data() + pl * sh.plane();
    std::span<cplx> row(buf.data(), sh.w);
    for (std::size_t r = 0; r < sh.h; ++r) {
      for (std::size_t q = 0; q < sh.w; ++q) row[q] = {re[r * sh.w + q], im[r * sh.w + q]};
      inverse ? row_plan.inverse(row) : row_plan.forward(row);
      for (std::size_t q = 0; q < sh.w; ++q) {
        re[r * sh.w + q] = row[q].real();
        im[r * sh.w + q] = row[q].imag();
      }
    }
    std::span<cplx> col(buf.data(), sh.h);
    for (std::size_t q = 0; q < sh.w; ++q) {
      for (std::size_t r = 0; r < sh.h; ++r) col[r] = {re[r * sh.w + q], im[r * sh.w + q]};
      inverse ? col_plan.inverse(col) : col_plan.forward(col);
      for (std::size_t r = 0; r < sh.h; ++r) {
        re[r * sh.w + q] = col[r].real() * norm;
        im[r * sh.w + q] = col[r].imag() * norm;
      }
    }
  }
}

}  // namespace

Spectrum fft2(const Tensor& x) {
  Spectrum s(x.shape());
  std::copy(x.data().begin(), x.data().end(), s.re.begin());
  transform_planes(s, false);
  return s;
}

Spectrum fft2(const Spectrum& x) {
  Spectrum s = x;
  transform_planes(s, false);
  return s;
}

Spectrum ifft2_complex(const Spectrum& s) {
  if (s.re.size() != s.shape.numel() || s.im.size() != s.shape.numel()) {
    throw ShapeError("ifft2: spectrum planes do not match shape " + s.shape.str());
  }
  Spectrum out = s;
  transform_planes(out, true);
  return out;
}

Tensor ifft2(const Spectrum& s) {
  Spectrum out = ifft2_complex(s);
  return Tensor(out.shape, std::move(out.re));
}

}  // namespace adasf
