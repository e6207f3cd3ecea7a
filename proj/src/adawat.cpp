#include "adasf/adawat.hpp"

#include <algorithm>
#include <cmath>

namespace adasf {

AnalysisVectors haar_init(std::size_t length) {
  if (length < 2 || length % 2 != 0) {
    throw ShapeError("haar_init: kernel length must be even and >= 2, got " + std::to_string(length));
  }
  const double r = 1.0 / std::sqrt(2.0);
  AnalysisVectors v{Tensor({1, 1, 1, length}), Tensor({1, 1, 1, length})};
  const std::size_t mid = length / 2 - 1;
  v.u0[mid] = r;
  v.u0[mid + 1] = r;
  v.u1[mid] = r;
  v.u1[mid + 1] = -r;
  return v;
}

namespace {

Tensor outer_tensor(const Tensor& a, const Tensor& b) {
  const std::size_t len = a.shape().w;
  Tensor k({1, 1, len, len});
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j < len; ++j) k[i * len + j] = a[i] * b[j];
  }
  return k;
}

void check_vectors(const Tensor& u0, const Tensor& u1) {
  const Shape& s = u0.shape();
  if (s != u1.shape() || s.n != 1 || s.c != 1 || s.h != 1 || s.w < 2) {
    throw ShapeError("wavelet vectors must both be [1,1,1,L] with L >= 2, got " + s.str() + " and " +
                     u1.shape().str());
  }
}

ConvParams wavelet_conv(std::size_t channels, std::size_t length) {
  return ConvParams{.stride = 2, .dilation = 1, .groups = channels, .pad = (length - 2) / 2};
}

Parameter depthwise(const std::string& name, std::size_t c) { return {name, Tensor({c, 1, 3, 3})}; }
Parameter bias(const std::string& name, std::size_t c) { return {name, Tensor({1, c, 1, 1})}; }

}  // namespace

WaveletKernels build_kernels(const AnalysisVectors& v) {
  check_vectors(v.u0, v.u1);
  return {outer_tensor(v.u0, v.u0), outer_tensor(v.u0, v.u1), outer_tensor(v.u1, v.u0), outer_tensor(v.u1, v.u1)};
}

AdaWatParams AdaWatParams::create(const std::string& prefix, std::size_t channels, std::size_t length) {
  AdaWatParams p;
  p.channels = channels;
  p.length = length;
  const AnalysisVectors haar = haar_init(length);
  p.u0 = Parameter(prefix + ".u0", haar.u0);
  p.u1 = Parameter(prefix + ".u1", haar.u1);
  p.s0 = Parameter(prefix + ".s0", haar.u0);
  p.s1 = Parameter(prefix + ".s1", haar.u1);
  p.dconv_lo_w = depthwise(prefix + ".dconv_lo.w", channels);
  p.dconv_lo_b = bias(prefix + ".dconv_lo.b", channels);
  p.dconv_lh_w = depthwise(prefix + ".dconv_lh.w", channels);
  p.dconv_lh_b = bias(prefix + ".dconv_lh.b", channels);
  p.dconv_hl_w = depthwise(prefix + ".dconv_hl.w", channels);
  p.dconv_hl_b = bias(prefix + ".dconv_hl.b", channels);
  p.dconv_hh_w = depthwise(prefix + ".dconv_hh.w", channels);
  p.dconv_hh_b = bias(prefix + ".dconv_hh.b", channels);
  return p;
}

std::vector<Parameter*> AdaWatParams::parameters() {
  return {&u0, &u1, &s0, &s1, &dconv_lo_w, &dconv_lo_b, &dconv_lh_w, &dconv_lh_b,
          &dconv_hl_w, &dconv_hl_b, &dconv_hh_w, &dconv_hh_b};
}

AdaWatParams AdaWatParams::channel_slice(std::size_t c) const {
  if (c >= channels) throw ShapeError("channel_slice: channel " + std::to_string(c) + " out of range");
  AdaWatParams out = create("slice", 1, length);
  out.u0.value = u0.value;
  out.u1.value = u1.value;
  out.s0.value = s0.value;
  out.s1.value = s1.value;
  // Weights are [C,1,3,3] and biases [1,C,1,1]; either way channel c owns one contiguous run.
  const auto copy = [this, c](const Parameter& src, Parameter& dst) {
    const std::size_t run = src.value.numel() / channels;
    std::copy_n(src.value.data().data() + c * run, run, dst.value.data().data());
  };
  copy(dconv_lo_w, out.dconv_lo_w);
  copy(dconv_lo_b, out.dconv_lo_b);
  copy(dconv_lh_w, out.dconv_lh_w);
  copy(dconv_lh_b, out.dconv_lh_b);
  copy(dconv_hl_w, out.dconv_hl_w);
  copy(dconv_hl_b, out.dconv_hl_b);
  copy(dconv_hh_w, out.dconv_hh_w);
  copy(dconv_hh_b, out.dconv_hh_b);
  return out;
}

SubbandVars adawat_forward(ad::Tape& tape, const ad::Var& f, AdaWatParams& p, bool enhance) {
  const Shape& s = f.shape();
  if (s.c != p.channels) {
    throw ShapeError("adawat_forward: expected " + std::to_string(p.channels) + " channels, got " + s.str());
  }
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("adawat_forward: spatial size " + s.str() + " must be even; pad the input first");
  }
  check_vectors(p.u0.value, p.u1.value);
  const ad::Var u0 = tape.param(p.u0);
  const ad::Var u1 = tape.param(p.u1);
  const ConvParams cp = wavelet_conv(p.channels, p.length);
  const auto band = [&](const ad::Var& a, const ad::Var& b) {
    return ad::conv2d(f, ad::repeat_kernel(ad::outer(a, b), p.channels), nullptr, cp);
  };
  SubbandVars out{band(u0, u0), band(u0, u1), band(u1, u0), band(u1, u1)};
  if (enhance) {
    const auto refine = [&](const ad::Var& x, Parameter& w, Parameter& b, std::size_t dilation) {
      const ConvParams dp{.stride = 1, .dilation = dilation, .groups = p.channels, .pad = dilation};
      return ad::add(x, ad::conv2d(x, tape.param(w), tape.param(b), dp));
    };
    out.ll = refine(out.ll, p.dconv_lo_w, p.dconv_lo_b, 3);
    out.lh = refine(out.lh, p.dconv_lh_w, p.dconv_lh_b, 1);
    out.hl = refine(out.hl, p.dconv_hl_w, p.dconv_hl_b, 1);
    out.hh = refine(out.hh, p.dconv_hh_w, p.dconv_hh_b, 1);
  }
  return out;
}

SubbandSet adawat_forward(const Tensor& f, AdaWatParams& p, bool enhance) {
  ad::Tape tape(false);
  const SubbandVars v = adawat_forward(tape, tape.constant(f), p, enhance);
  return {v.ll.value(), v.lh.value(), v.hl.value(), v.hh.value()};
}

ad::Var adaiwat(ad::Tape& tape, const SubbandVars& s, AdaWatParams& p) {
  const Shape& bs = s.ll.shape();
  if (s.lh.shape() != bs || s.hl.shape() != bs || s.hh.shape() != bs) {
    throw ShapeError("adaiwat: subband shapes differ: " + bs.str() + ", " + s.lh.shape().str() + ", " +
                     s.hl.shape().str() + ", " + s.hh.shape().str());
  }
  if (bs.c != p.channels) {
    throw ShapeError("adaiwat: expected " + std::to_string(p.channels) + " channels, got " + bs.str());
  }
  check_vectors(p.s0.value, p.s1.value);
  const ad::Var s0 = tape.param(p.s0);
  const ad::Var s1 = tape.param(p.s1);
  const ConvParams cp = wavelet_conv(p.channels, p.length);
  const auto up = [&](const ad::Var& band, const ad::Var& a, const ad::Var& b) {
    return ad::conv_transpose2d(band, ad::repeat_kernel(ad::outer(a, b), p.channels), nullptr, cp, 2 * bs.h,
                                2 * bs.w);
  };
  return ad::add(ad::add(up(s.ll, s0, s0), up(s.lh, s0, s1)), ad::add(up(s.hl, s1, s0), up(s.hh, s1, s1)));
}

Tensor adaiwat(const SubbandSet& s, AdaWatParams& p) {
  ad::Tape tape(false);
  const SubbandVars v{tape.constant(s.ll), tape.constant(s.lh), tape.constant(s.hl), tape.constant(s.hh)};
  return adaiwat(tape, v, p).value();
}

}  // namespace adasf
