#pragma once

#include <string>
#include <vector>

#include "adasf/tensor.hpp"

namespace adasf {

// Fusion-quality metrics. Inputs are [n,1,h,w] luminance in [0,1]; every
// metric works on the 8-bit quantization round(255 x) and, for n > 1, is the
// mean of the per-image values.

/// Shannon entropy (bits) of the 256-bin histogram.
double entropy(const Tensor& x);
/// Population standard deviation of the 8-bit values.
double std_dev(const Tensor& x);
/// sqrt(RF^2 + CF^2): RMS of horizontal and vertical first differences over
/// the h*(w-1) and (h-1)*w interior pairs.
double spatial_frequency(const Tensor& x);
/// MI(f,a) + MI(f,b) from 256x256 joint histograms, log base 2.
double mutual_information(const Tensor& f, const Tensor& a, const Tensor& b);
/// MI of one pair.
double mutual_information_pair(const Tensor& x, const Tensor& y);
/// corr(f-b, a) + corr(f-a, b); a zero-variance operand makes its term 0.
double scd(const Tensor& f, const Tensor& a, const Tensor& b);
/// Xydeas-Petrovic edge preservation with Sobel strength and orientation.
double qabf(const Tensor& f, const Tensor& a, const Tensor& b);
/// ssim_index(f,a) + ssim_index(f,b) on the quantized images.
double ssim_metric(const Tensor& f, const Tensor& a, const Tensor& b);

/// Constants of the Qabf sigmoids.
struct QabfConstants {
  static constexpr double gamma_g = 0.9994;
  static constexpr double kappa_g = -15.0;
  static constexpr double sigma_g = 0.5;
  static constexpr double gamma_a = 0.9879;
  static constexpr double kappa_a = -22.0;
  static constexpr double sigma_a = 0.8;
};

/// Values in [0,1] mapped to round(255 x) / 255, clamped.
Tensor quantize8(const Tensor& x);

struct MetricReport {
  double en = 0.0;
  double sd = 0.0;
  double sf = 0.0;
  double mi = 0.0;
  double scd = 0.0;
  double qabf = 0.0;
  double ssim = 0.0;
};

MetricReport compute_metrics(const Tensor& f, const Tensor& a, const Tensor& b);
MetricReport mean_report(const std::vector<MetricReport>& reports);

}  // namespace adasf
