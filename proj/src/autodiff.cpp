#include "adasf/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>

namespace adasf {

Parameter::Parameter(std::string name, Tensor v) : value(std::move(v)), grad(value.shape()), name_(std::move(name)) {}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.shape());
    return;
  }
  std::fill(grad.data().begin(), grad.data().end(), 0.0);
}

Tensor fan_in_uniform(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

namespace ad {

void Node::accumulate(const Tensor& g) {
  if (g.shape() != value.shape()) {
    throw ShapeError("gradient shape " + g.shape().str() + " does not match value " + value.shape().str());
  }
  if (grad.empty()) {
    grad = g;
  } else {
    grad += g;
  }
}

Var Tape::param(Parameter& p) {
  auto node = std::make_shared<Node>();
  node->value = p.value;
  if (recording_) {
    node->param = &p;
    node->requires_grad = true;
    node->epoch = epoch_;
    nodes_.push_back(node);
    consumed_ = false;
  }
  return {std::move(node), this};
}

Var Tape::constant(Tensor t) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  return {std::move(node), this};
}

Var Tape::make(Tensor value, bool requires_grad, std::function<void(const Tensor&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (recording_ && requires_grad) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->epoch = epoch_;
    nodes_.push_back(node);
    consumed_ = false;
  }
  return {std::move(node), this};
}

void Tape::backward(const Var& loss) {
  if (!loss.node()) throw std::logic_error("backward: empty loss");
  if (loss.value().numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + loss.shape().str());
  }
  if (consumed_) throw std::logic_error("backward: tape already consumed; record a new forward pass first");
  if (loss.requires_grad() && loss.node()->epoch != epoch_) {
    throw std::logic_error("backward: loss was not recorded in the current tape pass");
  }
  if (loss.requires_grad()) {
    loss.node()->accumulate(Tensor(loss.shape(), 1.0));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node& node = **it;
      if (!node.grad.empty()) {
        if (node.backward) node.backward(node.grad);
        if (node.param) node.param->grad += node.grad;
      }
      node.backward = nullptr;
    }
  }
  nodes_.clear();
  consumed_ = true;
  ++epoch_;
}

namespace {

Tape* tape_of(std::initializer_list<const Var*> vs) {
  for (const Var* v : vs) {
    if (v && v->tape()) return v->tape();
  }
  return nullptr;
}

bool any_grad(std::initializer_list<const Var*> vs) {
  return std::any_of(vs.begin(), vs.end(), [](const Var* v) { return v && v->requires_grad(); });
}

Var emit(std::initializer_list<const Var*> inputs, Tensor value, std::function<void(const Tensor&)> backward) {
  Tape* tape = tape_of(inputs);
  if (!tape) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return {std::move(node), nullptr};
  }
  const bool rg = tape->recording() && any_grad(inputs);
  return tape->make(std::move(value), rg, rg ? std::move(backward) : nullptr);
}

Var detached(const Var& ref, Tensor t) {
  if (ref.tape()) return ref.tape()->constant(std::move(t));
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  return {std::move(node), nullptr};
}

template <class F>
Tensor map_grad(const Tensor& g, const Tensor& x, F f) {
  Tensor out(g.shape());
  for (std::size_t i = 0; i < g.numel(); ++i) out[i] = g[i] * f(x[i]);
  return out;
}

// Unary elementwise op whose local derivative depends on input x and output y.
template <class Fwd, class Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  Tensor y(a.shape());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = fwd(x[i]);
  auto pa = a.node();
  auto saved_y = std::make_shared<Tensor>(y);
  return emit({&a}, std::move(y), [pa, saved_y, deriv](const Tensor& g) {
    if (!pa->requires_grad) return;
    Tensor gx(g.shape());
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] = g[i] * deriv(pa->value[i], (*saved_y)[i]);
    pa->accumulate(gx);
  });
}

}  // namespace

Var make_op(const std::vector<Var>& inputs, Tensor value, std::function<void(const Tensor&)> backward) {
  Tape* tape = nullptr;
  bool rg = false;
  for (const Var& v : inputs) {
    if (!tape) tape = v.tape();
    rg = rg || v.requires_grad();
  }
  if (!tape) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return {std::move(node), nullptr};
  }
  rg = rg && tape->recording();
  return tape->make(std::move(value), rg, rg ? std::move(backward) : nullptr);
}

Var add(const Var& a, const Var& b) {
  auto pa = a.node();
  auto pb = b.node();
  return emit({&a, &b}, adasf::add(a.value(), b.value()), [pa, pb](const Tensor& g) {
    if (pa->requires_grad) pa->accumulate(g);
    if (pb->requires_grad) pb->accumulate(g);
  });
}

Var sub(const Var& a, const Var& b) {
  auto pa = a.node();
  auto pb = b.node();
  return emit({&a, &b}, adasf::sub(a.value(), b.value()), [pa, pb](const Tensor& g) {
    if (pa->requires_grad) pa->accumulate(g);
    if (pb->requires_grad) pb->accumulate(adasf::scale(g, -1.0));
  });
}

Var mul(const Var& a, const Var& b) {
  auto pa = a.node();
  auto pb = b.node();
  return emit({&a, &b}, adasf::mul(a.value(), b.value()), [pa, pb](const Tensor& g) {
    if (pa->requires_grad) pa->accumulate(adasf::mul(g, pb->value));
    if (pb->requires_grad) pb->accumulate(adasf::mul(g, pa->value));
  });
}

Var div(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "div");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = a.value()[i] / b.value()[i];
  auto pa = a.node();
  auto pb = b.node();
  return emit({&a, &b}, std::move(y), [pa, pb](const Tensor& g) {
    const Tensor& av = pa->value;
    const Tensor& bv = pb->value;
    if (pa->requires_grad) {
      Tensor ga(g.shape());
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] = g[i] / bv[i];
      pa->accumulate(ga);
    }
    if (pb->requires_grad) {
      Tensor gb(g.shape());
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] = -g[i] * av[i] / (bv[i] * bv[i]);
      pb->accumulate(gb);
    }
  });
}

Var scale(const Var& a, double s) {
  auto pa = a.node();
  return emit({&a}, adasf::scale(a.value(), s), [pa, s](const Tensor& g) { pa->accumulate(adasf::scale(g, s)); });
}

Var add_scalar(const Var& a, double s) {
  Tensor y = a.value();
  for (double& v : y.data()) v += s;
  auto pa = a.node();
  return emit({&a}, std::move(y), [pa](const Tensor& g) { pa->accumulate(g); });
}

Var square(const Var& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(const Var& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var abs(const Var& a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return adasf::sigmoid(x); }, [](double, double y) { return y * (1.0 - y); });
}

Var silu(const Var& a) {
  return unary(
      a, [](double x) { return x * adasf::sigmoid(x); },
      [](double x, double) {
        const double s = adasf::sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sum(const Var& a) {
  auto pa = a.node();
  return emit({&a}, Tensor::scalar(adasf::sum(a.value())),
              [pa](const Tensor& g) { pa->accumulate(Tensor(pa->value.shape(), g.item())); });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().numel());
  if (n == 0) throw ShapeError("mean: empty tensor");
  auto pa = a.node();
  return emit({&a}, Tensor::scalar(adasf::sum(a.value()) / n),
              [pa, n](const Tensor& g) { pa->accumulate(Tensor(pa->value.shape(), g.item() / n)); });
}

Var conv2d(const Var& x, const Var& w, const Var* bias, const ConvParams& p) {
  Tensor y = adasf::conv2d(x.value(), w.value(), bias ? bias->value() : Tensor{}, p);
  auto px = x.node();
  auto pw = w.node();
  std::shared_ptr<Node> pb = bias ? bias->node() : nullptr;
  return emit({&x, &w, bias}, std::move(y), [px, pw, pb, p](const Tensor& g) {
    const Shape& xs = px->value.shape();
    if (px->requires_grad) px->accumulate(adasf::conv_transpose2d(g, pw->value, Tensor{}, p, xs.h, xs.w));
    if (pw->requires_grad) pw->accumulate(conv2d_weight_grad(px->value, g, pw->value.shape(), p));
    if (pb && pb->requires_grad) pb->accumulate(channel_sum(g).reshaped(pb->value.shape()));
  });
}

Var conv2d(const Var& x, const Var& w, const Var& bias, const ConvParams& p) { return conv2d(x, w, &bias, p); }

Var conv_transpose2d(const Var& y, const Var& w, const Var* bias, const ConvParams& p, std::size_t out_h,
                     std::size_t out_w) {
  Tensor x = adasf::conv_transpose2d(y.value(), w.value(), bias ? bias->value() : Tensor{}, p, out_h, out_w);
  auto py = y.node();
  auto pw = w.node();
  std::shared_ptr<Node> pb = bias ? bias->node() : nullptr;
  return emit({&y, &w, bias}, std::move(x), [py, pw, pb, p](const Tensor& g) {
    if (py->requires_grad) py->accumulate(adasf::conv2d(g, pw->value, p));
    if (pw->requires_grad) pw->accumulate(conv_transpose2d_weight_grad(py->value, g, pw->value.shape(), p));
    if (pb && pb->requires_grad) pb->accumulate(channel_sum(g).reshaped(pb->value.shape()));
  });
}

Var linear(const Var& x, const Var& w, const Var& bias) {
  if (w.shape().h != 1 || w.shape().w != 1) throw ShapeError("linear: weight must be [c_out, c_in, 1, 1]");
  return conv2d(x, w, &bias, ConvParams{});
}

Var layer_norm(const Var& x, const Var& weight, const Var& bias, double eps) {
  Tensor y = adasf::layer_norm(x.value(), weight.value(), bias.value(), eps);
  auto px = x.node();
  auto pw = weight.node();
  auto pb = bias.node();
  return emit({&x, &weight, &bias}, std::move(y), [px, pw, pb, eps](const Tensor& g) {
    const Tensor& xv = px->value;
    const Tensor& wv = pw->value;
    const Shape& s = xv.shape();
    const std::size_t hw = s.plane();
    const double inv_c = 1.0 / static_cast<double>(s.c);
    Tensor gx(s);
    Tensor gw(wv.shape());
    Tensor gb(pb->value.shape());
    std::vector<double> mean(hw);
    std::vector<double> rstd(hw);
    std::vector<double> m1(hw);
    std::vector<double> m2(hw);
    for (std::size_t n = 0; n < s.n; ++n) {
      std::fill(mean.begin(), mean.end(), 0.0);
      std::fill(rstd.begin(), rstd.end(), 0.0);
      std::fill(m1.begin(), m1.end(), 0.0);
      std::fill(m2.begin(), m2.end(), 0.0);
      for (std::size_t c = 0; c < s.c; ++c) {
        const double* xp = xv.plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) mean[i] += xp[i];
      }
      for (double& m : mean) m *= inv_c;
      for (std::size_t c = 0; c < s.c; ++c) {
        const double* xp = xv.plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) rstd[i] += (xp[i] - mean[i]) * (xp[i] - mean[i]);
      }
      for (double& r : rstd) r = 1.0 / std::sqrt(r * inv_c + eps);
      for (std::size_t c = 0; c < s.c; ++c) {
        const double* xp = xv.plane(n, c);
        const double* gp = g.plane(n, c);
        double acc_w = 0.0;
        double acc_b = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
          const double xhat = (xp[i] - mean[i]) * rstd[i];
          const double gxh = gp[i] * wv[c];
          m1[i] += gxh;
          m2[i] += gxh * xhat;
          acc_w += gp[i] * xhat;
          acc_b += gp[i];
        }
        gw[c] += acc_w;
        gb[c] += acc_b;
      }
      for (std::size_t c = 0; c < s.c; ++c) {
        const double* xp = xv.plane(n, c);
        const double* gp = g.plane(n, c);
        double* op = gx.plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) {
          const double xhat = (xp[i] - mean[i]) * rstd[i];
          op[i] = rstd[i] * (gp[i] * wv[c] - m1[i] * inv_c - xhat * m2[i] * inv_c);
        }
      }
    }
    if (px->requires_grad) px->accumulate(gx);
    if (pw->requires_grad) pw->accumulate(gw);
    if (pb->requires_grad) pb->accumulate(gb);
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  std::vector<Tensor> values;
  values.reserve(parts.size());
  std::vector<std::shared_ptr<Node>> nodes;
  Tape* tape = nullptr;
  bool rg = false;
  for (const Var& v : parts) {
    values.push_back(v.value());
    nodes.push_back(v.node());
    if (!tape) tape = v.tape();
    rg = rg || v.requires_grad();
  }
  Tensor y = adasf::concat_channels(values);
  if (!tape) return detached(Var{}, std::move(y));
  const bool record = tape->recording() && rg;
  return tape->make(std::move(y), record, [nodes](const Tensor& g) {
    std::size_t begin = 0;
    for (const auto& nd : nodes) {
      const std::size_t c = nd->value.shape().c;
      if (nd->requires_grad) nd->accumulate(adasf::slice_channels(g, begin, c));
      begin += c;
    }
  });
}

Var slice_channels(const Var& x, std::size_t begin, std::size_t count) {
  auto px = x.node();
  return emit({&x}, adasf::slice_channels(x.value(), begin, count), [px, begin, count](const Tensor& g) {
    const Shape& s = px->value.shape();
    Tensor gx(s);
    for (std::size_t n = 0; n < s.n; ++n) std::copy_n(g.plane(n, 0), count * s.plane(), gx.plane(n, begin));
    px->accumulate(gx);
  });
}

Var pad(const Var& x, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right, PadMode mode) {
  auto px = x.node();
  return emit({&x}, adasf::pad(x.value(), top, bottom, left, right, mode), [px, top, left, mode](const Tensor& g) {
    px->accumulate(pad_adjoint(g, px->value.shape(), top, left, mode));
  });
}

Var outer(const Var& u, const Var& v) {
  const Shape& us = u.shape();
  if (us != v.shape() || us.n != 1 || us.c != 1 || us.h != 1) {
    throw ShapeError("outer: expected two [1,1,1,L] vectors, got " + us.str() + " and " + v.shape().str());
  }
  const std::size_t len = us.w;
  Tensor k({1, 1, len, len});
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j < len; ++j) k[i * len + j] = u.value()[i] * v.value()[j];
  }
  auto pu = u.node();
  auto pv = v.node();
  return emit({&u, &v}, std::move(k), [pu, pv, len](const Tensor& g) {
    Tensor gu(pu->value.shape());
    Tensor gv(pv->value.shape());
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        gu[i] += g[i * len + j] * pv->value[j];
        gv[j] += g[i * len + j] * pu->value[i];
      }
    }
    if (pu->requires_grad) pu->accumulate(gu);
    if (pv->requires_grad) pv->accumulate(gv);
  });
}

Var repeat_kernel(const Var& k, std::size_t c) {
  const Shape& ks = k.shape();
  if (ks.n != 1 || ks.c != 1) throw ShapeError("repeat_kernel: expected [1,1,k,k], got " + ks.str());
  Tensor out({c, 1, ks.h, ks.w});
  for (std::size_t i = 0; i < c; ++i) std::copy_n(k.value().data().data(), ks.numel(), out.data().data() + i * ks.numel());
  auto pk = k.node();
  return emit({&k}, std::move(out), [pk, c](const Tensor& g) {
    Tensor gk(pk->value.shape());
    const std::size_t m = gk.numel();
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < m; ++j) gk[j] += g[i * m + j];
    }
    pk->accumulate(gk);
  });
}

Var sobel_grad(const Var& x) {
  Tensor gx;
  Tensor gy;
  sobel_xy(x.value(), gx, gy);
  Tensor mag(gx.shape());
  for (std::size_t i = 0; i < mag.numel(); ++i) mag[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
  auto px = x.node();
  auto saved = std::make_shared<std::array<Tensor, 3>>(std::array<Tensor, 3>{gx, gy, mag});
  return emit({&x}, std::move(mag), [px, saved](const Tensor& g) {
    const auto& [sx, sy, m] = *saved;
    Tensor dx(g.shape());
    Tensor dy(g.shape());
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (m[i] > 0.0) {
        dx[i] = g[i] * sx[i] / m[i];
        dy[i] = g[i] * sy[i] / m[i];
      }
    }
    // sobel_xy is a 3x3 correlation of the replicate-padded input.
    static const Tensor kx({1, 1, 3, 3}, {-1, 0, 1, -2, 0, 2, -1, 0, 1});
    static const Tensor ky({1, 1, 3, 3}, {-1, -2, -1, 0, 0, 0, 1, 2, 1});
    const Tensor back = adasf::add(conv_transpose2d(dx, kx, ConvParams{}), conv_transpose2d(dy, ky, ConvParams{}));
    px->accumulate(pad_adjoint(back, px->value.shape(), 1, 1, PadMode::Replicate));
  });
}

void zero_grad(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

void adam_step(AdamState& state, const std::vector<Parameter*>& params) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    if (m.shape() != p.value.shape()) throw ShapeError("adam_step: moment shape mismatch for " + p.name());
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

GradCheckResult finite_diff_check(const LossFn& f, Parameter& p, double h, FdScheme scheme) {
  p.zero_grad();
  {
    Tape tape;
    const Var loss = f(tape);
    tape.backward(loss);
  }
  const Tensor analytic = p.grad;
  const auto eval = [&f] {
    Tape tape(false);
    return f(tape).value().item();
  };
  GradCheckResult res;
  for (std::size_t i = 0; i < p.value.numel(); ++i) {
    const double orig = p.value[i];
    const double step = h * std::max(1.0, std::abs(orig));
    const auto central = [&](double s) {
      p.value[i] = orig + s;
      const double fp = eval();
      p.value[i] = orig - s;
      const double fm = eval();
      p.value[i] = orig;
      return (fp - fm) / (2.0 * s);
    };
    const double numeric = scheme == FdScheme::Central ? central(step)
                                                       : (4.0 * central(0.5 * step) - central(step)) / 3.0;
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max({1e-8, std::abs(a), std::abs(numeric)});
    if (i == 0 || err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_index = i;
      res.analytic = a;
      res.numeric = numeric;
    }
  }
  p.grad = analytic;
  return res;
}

}  // namespace ad
}  // namespace adasf
