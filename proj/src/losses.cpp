#include "adasf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "adasf/ops.hpp"

namespace adasf {

namespace {

constexpr std::size_t kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const Tensor& gaussian_window() {
  static const Tensor win = [] {
    Tensor w({1, 1, kWin, kWin});
    std::vector<double> g(kWin);
    double total = 0.0;
    for (std::size_t i = 0; i < kWin; ++i) {
      const double d = static_cast<double>(i) - static_cast<double>(kWin / 2);
      g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      total += g[i];
    }
    for (double& v : g) v /= total;
    for (std::size_t i = 0; i < kWin; ++i)
      for (std::size_t j = 0; j < kWin; ++j) w[i * kWin + j] = g[i] * g[j];
    return w;
  }();
  return win;
}

void check_pair(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": shapes differ, " + a.str() + " vs " + b.str());
  if (a.c != 1) throw ShapeError(std::string(what) + ": expected single-channel input, got " + a.str());
}

}  // namespace

ad::Var ssim_index(const ad::Var& x, const ad::Var& y) {
  check_pair(x.shape(), y.shape(), "ssim_index");
  if (x.shape().h < kWin || x.shape().w < kWin) {
    throw ShapeError("ssim_index: images must be at least 11x11, got " + x.shape().str());
  }
  ad::Tape* tape = x.tape() ? x.tape() : y.tape();
  if (!tape) throw std::logic_error("ssim_index: inputs are not attached to a tape");
  const ad::Var win = tape->constant(gaussian_window());
  const auto blur = [&win](const ad::Var& v) { return ad::conv2d(v, win, nullptr, ConvParams{}); };
  const ad::Var mx = blur(x);
  const ad::Var my = blur(y);
  const ad::Var mxx = ad::mul(mx, mx);
  const ad::Var myy = ad::mul(my, my);
  const ad::Var mxy = ad::mul(mx, my);
  const ad::Var sxx = ad::sub(blur(ad::mul(x, x)), mxx);
  const ad::Var syy = ad::sub(blur(ad::mul(y, y)), myy);
  const ad::Var sxy = ad::sub(blur(ad::mul(x, y)), mxy);
  const ad::Var num = ad::mul(ad::add_scalar(ad::scale(mxy, 2.0), kC1), ad::add_scalar(ad::scale(sxy, 2.0), kC2));
  const ad::Var den = ad::mul(ad::add_scalar(ad::add(mxx, myy), kC1), ad::add_scalar(ad::add(sxx, syy), kC2));
  return ad::mean(ad::div(num, den));
}

double ssim_index(const Tensor& x, const Tensor& y) {
  ad::Tape tape(false);
  return ssim_index(tape.constant(x), tape.constant(y)).value().item();
}

ad::Var loss_ssim(const ad::Var& f, const Tensor& i1, const Tensor& i2) {
  check_pair(f.shape(), i1.shape(), "loss_ssim");
  check_pair(f.shape(), i2.shape(), "loss_ssim");
  ad::Tape* tape = f.tape();
  const ad::Var s1 = ssim_index(f, tape->constant(i1));
  const ad::Var s2 = ssim_index(f, tape->constant(i2));
  return ad::add_scalar(ad::scale(ad::add(s1, s2), -1.0), 2.0);
}

double loss_ssim(const Tensor& f, const Tensor& i1, const Tensor& i2) {
  ad::Tape tape(false);
  return loss_ssim(tape.constant(f), i1, i2).value().item();
}

ad::Var loss_text(const ad::Var& f, const Tensor& i1, const Tensor& i2) {
  check_pair(f.shape(), i1.shape(), "loss_text");
  check_pair(f.shape(), i2.shape(), "loss_text");
  const Tensor target = maximum(sobel_grad(i1), sobel_grad(i2));
  return ad::mean(ad::abs(ad::sub(ad::sobel_grad(f), f.tape()->constant(target))));
}

double loss_text(const Tensor& f, const Tensor& i1, const Tensor& i2) {
  ad::Tape tape(false);
  return loss_text(tape.constant(f), i1, i2).value().item();
}

Tensor aggregate(const Tensor& i1, const Tensor& i2, Aggregation mode) {
  return mode == Aggregation::Max ? maximum(i1, i2) : scale(add(i1, i2), 0.5);
}

ad::Var loss_int(const ad::Var& f, const Tensor& i1, const Tensor& i2, Aggregation mode) {
  check_pair(f.shape(), i1.shape(), "loss_int");
  check_pair(f.shape(), i2.shape(), "loss_int");
  return ad::mean(ad::abs(ad::sub(f, f.tape()->constant(aggregate(i1, i2, mode)))));
}

double loss_int(const Tensor& f, const Tensor& i1, const Tensor& i2, Aggregation mode) {
  ad::Tape tape(false);
  return loss_int(tape.constant(f), i1, i2, mode).value().item();
}

LossReport LossVars::report(const LossWeights& w) const {
  return {ssim.value().item(), text.value().item(), intensity.value().item(), total.value().item(), w};
}

LossVars total_loss(const ad::Var& f, const Tensor& i1, const Tensor& i2, const LossWeights& w, Aggregation mode) {
  LossVars v;
  v.ssim = loss_ssim(f, i1, i2);
  v.text = loss_text(f, i1, i2);
  v.intensity = loss_int(f, i1, i2, mode);
  v.total = ad::add(ad::add(ad::scale(v.ssim, w.ssim), ad::scale(v.text, w.text)), ad::scale(v.intensity, w.intensity));
  return v;
}

LossReport total_loss(const Tensor& f, const Tensor& i1, const Tensor& i2, const LossWeights& w, Aggregation mode) {
  ad::Tape tape(false);
  return total_loss(tape.constant(f), i1, i2, w, mode).report(w);
}

}  // namespace adasf
