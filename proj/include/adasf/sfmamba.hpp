#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "adasf/autodiff.hpp"
#include "adasf/tensor.hpp"

namespace adasf {

enum class ScanDir { LR, RL, TB, BT };

inline const std::vector<ScanDir>& all_scan_dirs() {
  static const std::vector<ScanDir> dirs{ScanDir::LR, ScanDir::RL, ScanDir::TB, ScanDir::BT};
  return dirs;
}

enum class MaskMode { Hard, Soft };

inline constexpr double kDefaultSharpness = 50.0;

struct SsdBlockParams {
  std::size_t channels = 0;  // C of the block input
  std::size_t c_prime = 0;   // C'
  std::size_t groups = 1;    // G
  std::size_t d_state = 16;  // d
  std::size_t hidden = 0;    // MLP hidden width

  Parameter norm1_w;
  Parameter norm1_b;
  Parameter w_in;  // [2C'+2Gd, C, 1, 1]
  Parameter b_in;
  Parameter w_se;  // depthwise [2C'+2Gd, 1, 3, 3]
  Parameter b_se;
  Parameter lambda_raw;  // [1,1,1,1]; lambda = sigmoid(lambda_raw)
  Parameter w_gate;      // [C', C, 1, 1]
  Parameter b_gate;
  Parameter w_out;  // [C, C', 1, 1], zero at init
  Parameter b_out;
  Parameter norm2_w;
  Parameter norm2_b;
  Parameter mlp_w1;  // [hidden, C, 1, 1]
  Parameter mlp_b1;
  Parameter mlp_w2;  // [C, hidden, 1, 1], zero at init
  Parameter mlp_b2;

  /// Uniform fan-in init; w_out and mlp_w2 (and their biases) start at zero
  /// so the block is the identity map.
  static SsdBlockParams create(const std::string& prefix, std::size_t channels, std::size_t c_prime,
                               std::size_t groups, std::size_t d_state, std::size_t mlp_ratio, std::mt19937_64& rng);

  [[nodiscard]] std::size_t proj_width() const { return 2 * c_prime + 2 * groups * d_state; }
  [[nodiscard]] double lambda() const;
  std::vector<Parameter*> parameters();
};

struct XBCA {
  Tensor x;
  Tensor b;
  Tensor c;
  Tensor a;
};

struct XBCAVars {
  ad::Var x;
  ad::Var b;
  ad::Var c;
  ad::Var a;
};

/// L_S = SiLU(depthwise 3x3 conv(lp) + bias).
Tensor spatial_branch(const Tensor& lp, const Tensor& w_se, const Tensor& b_se);
ad::Var spatial_branch(const ad::Var& lp, const ad::Var& w_se, const ad::Var& b_se);

/// Per-plane FFT power thresholding. Power is normalized by the plane's max
/// so it lies in [0,1]; the hard mask keeps bins with P >= lambda, the soft
/// mask is sigmoid(k_sharp (P - lambda)). lambda must lie in (0,1].
Tensor freq_branch(const Tensor& lp, double lambda, MaskMode mode, double k_sharp = kDefaultSharpness);
/// lambda is a [1,1,1,1] Var; gradients flow to lp and lambda.
ad::Var freq_branch(const ad::Var& lp, const ad::Var& lambda, MaskMode mode, double k_sharp = kDefaultSharpness);

/// fused = ls + lt, split as X [C'], B [Gd], C [Gd], A_raw [C']; A = sigmoid(A_raw).
XBCA split_xbca(const Tensor& ls, const Tensor& lt, std::size_t c_prime, std::size_t groups, std::size_t d_state);
XBCAVars split_xbca(const ad::Var& ls, const ad::Var& lt, std::size_t c_prime, std::size_t groups,
                    std::size_t d_state);

/// Directional raster scans h <- A h + B x, y = <C, h>, state reset at the
/// start of every line, averaged over `dirs`.
Tensor ssd2d_scan(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c, std::size_t groups,
                  const std::vector<ScanDir>& dirs = all_scan_dirs());
ad::Var ssd2d_scan(const ad::Var& x, const ad::Var& a, const ad::Var& b, const ad::Var& c, std::size_t groups,
                   const std::vector<ScanDir>& dirs = all_scan_dirs());

struct BlockOptions {
  MaskMode mask = MaskMode::Hard;
  double k_sharp = kDefaultSharpness;
  std::vector<ScanDir> dirs = all_scan_dirs();
};

ad::Var block_forward(ad::Tape& tape, const ad::Var& l_in, SsdBlockParams& p, const BlockOptions& opt);
Tensor block_forward(const Tensor& l_in, SsdBlockParams& p, const BlockOptions& opt);

}  // namespace adasf
