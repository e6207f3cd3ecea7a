#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adasf/adawat.hpp"
#include "adasf/autodiff.hpp"
#include "adasf/losses.hpp"
#include "adasf/sfmamba.hpp"
#include "adasf/tensor.hpp"

namespace adasf {

/// Raised when a forward pass produces NaN or infinity; names the stage.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& stage, const std::string& what)
      : std::runtime_error(what), stage_(stage) {}
  [[nodiscard]] const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct FusionConfig {
  std::size_t channels = 64;  // C
  std::size_t n1 = 2;         // shallow blocks per path
  std::size_t n2 = 4;         // deep blocks
  std::size_t mlp_ratio = 2;
  std::size_t wavelet_length = 2;
  std::size_t c_prime = 0;  // 0 means 2 * channels
  std::size_t groups = 1;
  std::size_t d_state = 16;
  LossWeights weights;
  Aggregation aggregation = Aggregation::Max;
  std::uint64_t seed = 0;
  double k_sharp = kDefaultSharpness;

  [[nodiscard]] std::size_t resolved_c_prime() const { return c_prime == 0 ? 2 * channels : c_prime; }
  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct ModelParams {
  FusionConfig config;
  Parameter stem_w;  // [C,1,3,3], stride 2
  Parameter stem_b;
  AdaWatParams adawat;
  std::vector<SsdBlockParams> shallow_hi;  // width 3C
  std::vector<SsdBlockParams> shallow_lo;  // width C
  std::vector<SsdBlockParams> deep;        // width C
  Parameter head_up_w;  // transposed 2x2 stride 2, C -> C/2, stored as [C, C/2, 2, 2]
  Parameter head_up_b;
  Parameter head_out_w;  // [1, C/2, 3, 3]
  Parameter head_out_b;

  /// Deterministic init from a generator seeded with config.seed.
  static ModelParams create(const FusionConfig& cfg);
  std::vector<Parameter*> parameters();
  [[nodiscard]] std::vector<const Parameter*> parameters() const;
};

std::size_t param_count(const ModelParams& p);

/// SiLU(conv3x3 stride 2 (i) + b). H and W must be divisible by 4.
ad::Var embed(const ad::Var& i, ModelParams& p);
Tensor embed(const Tensor& i, ModelParams& p);

struct FusedBands {
  Tensor hi;  // [n,3C,h,w]
  Tensor lo;  // [n,C,h,w]
};
struct FusedBandVars {
  ad::Var hi;
  ad::Var lo;
};

/// hi = concat(lh1+lh2, hl1+hl2, hh1+hh2); lo = ll1 + ll2.
FusedBands freq_segmented_fuse(const SubbandSet& s1, const SubbandSet& s2);
FusedBandVars freq_segmented_fuse(const SubbandVars& s1, const SubbandVars& s2);

/// Full network. Soft mask for training, hard for inference.
ad::Var fuse(ad::Tape& tape, const ad::Var& i1, const ad::Var& i2, ModelParams& p, MaskMode mask);
Tensor fuse(const Tensor& i1, const Tensor& i2, ModelParams& p, MaskMode mask = MaskMode::Hard);

struct ImagePair {
  Tensor a;  // [1,1,h,w]
  Tensor b;
};

struct TrainConfig {
  std::size_t steps = 200;
  double lr = 1e-4;
  std::size_t batch = 0;  // 0 uses every pair each step
  std::size_t patch = 0;  // 0 trains on whole images
  double ema = 0.9;
};

struct LossRecord {
  std::uint64_t step = 0;  // 1-based, continues across resumes
  LossReport loss;
  double smoothed = 0.0;
};

/// Trainer state that survives a checkpoint.
struct TrainState {
  ad::AdamState adam;
  double ema_value = 0.0;
  double ema_weight = 0.0;  // 1 - beta^t, for bias correction
};

/// Forward + L_total + backward + Adam per step. Deterministic given the
/// config seed and the state.
std::vector<LossRecord> train_toy(ModelParams& p, TrainState& state, const std::vector<ImagePair>& pairs,
                                  const TrainConfig& tc);

/// Text manifest (format version, config echo, name and shape per parameter)
/// followed by little-endian float64 payloads in manifest order.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& p, const TrainState* state = nullptr);
struct Checkpoint {
  ModelParams params;
  TrainState state;
};
/// Rebuilds the model from the echoed config and rejects any parameter whose
/// name or shape disagrees with it.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// key=value lines for the config echo.
std::string config_to_text(const FusionConfig& cfg);

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};
struct GradcheckReport {
  std::vector<ParamCheck> params;
  [[nodiscard]] const ParamCheck& worst() const;
};

/// Check of L_total w.r.t. every parameter of a model built from cfg, with
/// weights drawn at random so no path is inactive. Uses Richardson-extrapolated
/// central differences with h = 1e-4: at this loss scale plain h = 1e-5
/// differences sit at the roundoff floor for small gradient entries.
GradcheckReport gradcheck_model(const FusionConfig& cfg, std::size_t h, std::size_t w,
                                const std::function<void(const ParamCheck&)>& progress = {});

}  // namespace adasf
