#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "adasf/tensor.hpp"

namespace adasf {

/// One-dimensional complex DFT of a fixed length.
///
/// Lengths whose prime factors are all <= 7 run a recursive mixed-radix
/// Cooley-Tukey decomposition; any other length goes through Bluestein's
/// chirp-z algorithm on a power-of-two convolution. The transform is
/// unnormalized: forward computes sum_j x_j exp(-2 pi i jk/n), inverse uses
/// the conjugate kernel. Scaling is left to the caller.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] bool uses_bluestein() const { return bluestein_ != nullptr; }

  void forward(std::span<std::complex<double>> data) const { run(data, false); }
  void inverse(std::span<std::complex<double>> data) const { run(data, true); }

 private:
  struct Bluestein;
  void run(std::span<std::complex<double>> data, bool inverse) const;
  void mixed_radix(const std::complex<double>* in, std::complex<double>* out, std::size_t n, std::size_t stride,
                   std::size_t level, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> factors_;
  std::vector<std::complex<double>> twiddles_;  // exp(-2 pi i j / n)
  std::unique_ptr<Bluestein> bluestein_;
};

// 2-D transforms over every (n, c) plane. Both directions carry a
// 1/sqrt(h*w) factor (unitary convention), so ifft2(fft2(x)) == x and
// sum |x|^2 == sum |X|^2.
Spectrum fft2(const Tensor& x);
Spectrum fft2(const Spectrum& x);
Spectrum ifft2_complex(const Spectrum& s);
/// Real part of the unitary inverse transform.
Tensor ifft2(const Spectrum& s);

}  // namespace adasf
