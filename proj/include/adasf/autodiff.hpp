#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "adasf/ops.hpp"
#include "adasf/tensor.hpp"

namespace adasf {

/// A named learnable leaf. `grad` always has the shape of `value`.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  [[nodiscard]] const std::string& name() const { return name_; }
  Tensor value;
  Tensor grad;

  void zero_grad();

 private:
  std::string name_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) draws in row-major order.
Tensor fan_in_uniform(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng);

namespace ad {

class Tape;

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  std::function<void(const Tensor&)> backward;
  Parameter* param = nullptr;
  bool requires_grad = false;
  std::uint64_t epoch = 0;

  void accumulate(const Tensor& g);
};

/// Handle to a value recorded on a tape (or a detached constant).
class Var {
 public:
  Var() = default;
  Var(std::shared_ptr<Node> node, Tape* tape) : node_(std::move(node)), tape_(tape) {}

  [[nodiscard]] const Tensor& value() const { return node_->value; }
  [[nodiscard]] const Shape& shape() const { return node_->value.shape(); }
  [[nodiscard]] bool requires_grad() const { return node_ && node_->requires_grad; }
  [[nodiscard]] Tape* tape() const { return tape_; }
  [[nodiscard]] const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
  Tape* tape_ = nullptr;
};

/// Ordered record of differentiable primitive applications.
///
/// Nodes are appended in creation order, which is a valid topological order,
/// so backward() is a single reverse sweep. A non-recording tape still
/// evaluates every op but keeps no graph, which is what inference uses.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  [[nodiscard]] bool recording() const { return recording_; }

  Var param(Parameter& p);
  Var constant(Tensor t);

  /// Internal: wraps an op result. `backward` may be empty for constants.
  Var make(Tensor value, bool requires_grad, std::function<void(const Tensor&)> backward);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, accumulating
  /// into every Parameter reached. The tape is consumed afterwards.
  void backward(const Var& loss);

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
  bool recording_;
  bool consumed_ = false;
  std::uint64_t epoch_ = 1;
};

/// Records a custom op. `backward` receives d(loss)/d(output) and must call
/// accumulate() on the nodes of whichever inputs require grad. Inputs only
/// decide which tape is used and whether the op is recorded at all.
Var make_op(const std::vector<Var>& inputs, Tensor value, std::function<void(const Tensor&)> backward);

// Differentiable primitives. Shapes follow the tensor-core contracts.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);
/// sqrt with zero derivative at 0 (subgradient choice).
Var sqrt(const Var& a);
/// |x| with sign(0) = 0.
Var abs(const Var& a);
Var sigmoid(const Var& a);
Var silu(const Var& a);
Var tanh(const Var& a);
/// Scalar [1,1,1,1] sum / mean of all entries.
Var sum(const Var& a);
Var mean(const Var& a);

Var conv2d(const Var& x, const Var& w, const Var* bias, const ConvParams& p);
Var conv2d(const Var& x, const Var& w, const Var& bias, const ConvParams& p);
Var conv_transpose2d(const Var& y, const Var& w, const Var* bias, const ConvParams& p, std::size_t out_h = 0,
                     std::size_t out_w = 0);
Var linear(const Var& x, const Var& w, const Var& bias);
Var layer_norm(const Var& x, const Var& weight, const Var& bias, double eps = 1e-5);

Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& x, std::size_t begin, std::size_t count);
Var pad(const Var& x, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right, PadMode mode);

/// Outer product u v^T of two [1,1,1,L] vectors as a [1,1,L,L] kernel.
Var outer(const Var& u, const Var& v);
/// Tiles a [1,1,k,k] kernel into [c,1,k,k] (one copy per group).
Var repeat_kernel(const Var& k, std::size_t c);

/// Sobel gradient magnitude, replicate padding, single channel.
Var sobel_grad(const Var& x);

/// Adam with bias correction; per-parameter moments are keyed by position in
/// the parameter list passed to step(), which must stay stable across calls.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

void adam_step(AdamState& state, const std::vector<Parameter*>& params);
void zero_grad(const std::vector<Parameter*>& params);

/// Builds a scalar loss on the given tape.
using LossFn = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central: (f(p+h) - f(p-h)) / 2h. Richardson: (4 D(h/2) - D(h)) / 3, which
/// cancels the h^2 term so a larger h keeps roundoff down on large losses.
enum class FdScheme { Central, Richardson };

/// Compares the tape gradient of `f` w.r.t. `p` with central differences
/// using step h * max(1, |p_i|). Error per entry is
/// |a - n| / max(1e-8, |a|, |n|); the maximum is returned. Leaves p.value
/// unchanged and p.grad holding the analytic gradient.
GradCheckResult finite_diff_check(const LossFn& f, Parameter& p, double h = 1e-5,
                                  FdScheme scheme = FdScheme::Central);

}  // namespace ad
}  // namespace adasf
