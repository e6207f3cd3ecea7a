#pragma once

#include "adasf/autodiff.hpp"
#include "adasf/tensor.hpp"

namespace adasf {

/// Element-wise aggregation of the two sources for the intensity loss.
enum class Aggregation { Max, Mean };

struct LossWeights {
  double ssim = 10.0;
  double text = 20.0;
  double intensity = 20.0;
};

/// Mean local SSIM over the valid region: 11x11 Gaussian window, sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Inputs are [n,1,h,w] with h, w >= 11.
double ssim_index(const Tensor& x, const Tensor& y);
ad::Var ssim_index(const ad::Var& x, const ad::Var& y);

/// (1 - SSIM(f,i1)) + (1 - SSIM(f,i2)).
double loss_ssim(const Tensor& f, const Tensor& i1, const Tensor& i2);
ad::Var loss_ssim(const ad::Var& f, const Tensor& i1, const Tensor& i2);

/// mean | |grad f| - max(|grad i1|, |grad i2|) | with Sobel magnitudes.
double loss_text(const Tensor& f, const Tensor& i1, const Tensor& i2);
ad::Var loss_text(const ad::Var& f, const Tensor& i1, const Tensor& i2);

/// mean |f - M(i1, i2)|.
Tensor aggregate(const Tensor& i1, const Tensor& i2, Aggregation mode);
double loss_int(const Tensor& f, const Tensor& i1, const Tensor& i2, Aggregation mode = Aggregation::Max);
ad::Var loss_int(const ad::Var& f, const Tensor& i1, const Tensor& i2, Aggregation mode = Aggregation::Max);

struct LossReport {
  double l_ssim = 0.0;
  double l_text = 0.0;
  double l_int = 0.0;
  double l_total = 0.0;
  LossWeights weights;
};

struct LossVars {
  ad::Var ssim;
  ad::Var text;
  ad::Var intensity;
  ad::Var total;

  [[nodiscard]] LossReport report(const LossWeights& w) const;
};

LossVars total_loss(const ad::Var& f, const Tensor& i1, const Tensor& i2, const LossWeights& w,
                    Aggregation mode = Aggregation::Max);
LossReport total_loss(const Tensor& f, const Tensor& i1, const Tensor& i2, const LossWeights& w,
                      Aggregation mode = Aggregation::Max);

}  // namespace adasf
