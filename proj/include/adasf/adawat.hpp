#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "adasf/autodiff.hpp"
#include "adasf/tensor.hpp"

namespace adasf {

/// Low-pass (u0) and high-pass (u1) analysis vectors, each stored as [1,1,1,L].
struct AnalysisVectors {
  Tensor u0;
  Tensor u1;

  [[nodiscard]] std::size_t length() const { return u0.shape().w; }
};

/// Haar pair: u0 = [1, 1]/sqrt2, u1 = [1, -1]/sqrt2. For length 4 the pair
/// is centred in zeros, which keeps perfect reconstruction under the
/// (L-2)/2 padding rule.
AnalysisVectors haar_init(std::size_t length = 2);

/// The four separable subband kernels, each [1,1,L,L]:
/// LL = u0 u0^T, LH = u0 u1^T, HL = u1 u0^T, HH = u1 u1^T.
struct WaveletKernels {
  Tensor ll;
  Tensor lh;
  Tensor hl;
  Tensor hh;
};

WaveletKernels build_kernels(const AnalysisVectors& v);

struct SubbandSet {
  Tensor ll;
  Tensor lh;
  Tensor hl;
  Tensor hh;
};

struct SubbandVars {
  ad::Var ll;
  ad::Var lh;
  ad::Var hl;
  ad::Var hh;
};

/// Learnable state of one wavelet stage. Analysis and synthesis vectors are
/// independent; the dilated enhancement convs are depthwise and residual.
struct AdaWatParams {
  std::size_t channels = 0;
  std::size_t length = 2;

  Parameter u0;  // analysis
  Parameter u1;
  Parameter s0;  // synthesis
  Parameter s1;
  Parameter dconv_lo_w;  // [C,1,3,3], dilation 3
  Parameter dconv_lo_b;
  Parameter dconv_lh_w;  // dilation 1
  Parameter dconv_lh_b;
  Parameter dconv_hl_w;
  Parameter dconv_hl_b;
  Parameter dconv_hh_w;
  Parameter dconv_hh_b;

  /// Haar vectors and zero enhancement weights.
  static AdaWatParams create(const std::string& prefix, std::size_t channels, std::size_t length = 2);

  std::vector<Parameter*> parameters();
  [[nodiscard]] AnalysisVectors analysis() const { return {u0.value, u1.value}; }
  [[nodiscard]] AnalysisVectors synthesis() const { return {s0.value, s1.value}; }

  /// A one-channel copy using the enhancement weights of channel `c`.
  [[nodiscard]] AdaWatParams channel_slice(std::size_t c) const;
};

/// Stride-2 grouped decomposition of f [n,C,h,w] into four [n,C,h/2,w/2]
/// subbands, with optional dilated enhancement (band + dconv(band)).
SubbandVars adawat_forward(ad::Tape& tape, const ad::Var& f, AdaWatParams& p, bool enhance);
SubbandSet adawat_forward(const Tensor& f, AdaWatParams& p, bool enhance);

/// Transposed-convolution recoupling: sum over bands of conv^T(band, K_band).
ad::Var adaiwat(ad::Tape& tape, const SubbandVars& s, AdaWatParams& p);
Tensor adaiwat(const SubbandSet& s, AdaWatParams& p);

}  // namespace adasf
