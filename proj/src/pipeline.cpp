#include "adasf/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "adasf/config.hpp"
#include "adasf/imageio.hpp"

namespace adasf {

namespace {

constexpr const char* kCheckpointMagic = "adasffuse-checkpoint 1";

const ConvParams kStemConv{.stride = 2, .dilation = 1, .groups = 1, .pad = 1};
const ConvParams kHeadUpConv{.stride = 2, .dilation = 1, .groups = 1, .pad = 0};
const ConvParams kHeadOutConv{.stride = 1, .dilation = 1, .groups = 1, .pad = 1};

std::vector<SsdBlockParams> make_stack(const std::string& prefix, std::size_t count, std::size_t width,
                                       const FusionConfig& cfg, std::mt19937_64& rng) {
  std::vector<SsdBlockParams> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(SsdBlockParams::create(prefix + "." + std::to_string(k), width, cfg.resolved_c_prime(), cfg.groups,
                                         cfg.d_state, cfg.mlp_ratio, rng));
  }
  return out;
}

ad::Var checked(const ad::Var& v, const std::string& stage) {
  if (!all_finite(v.value())) {
    throw NumericError(stage, "fuse: non-finite values after stage '" + stage + "'");
  }
  return v;
}

Tensor stack_batch(const std::vector<const Tensor*>& items) {
  const Shape s = items.front()->shape();
  Tensor out({items.size() * s.n, s.c, s.h, s.w});
  std::size_t offset = 0;
  for (const Tensor* t : items) {
    require_same_shape(*items.front(), *t, "stack_batch");
    std::copy(t->data().begin(), t->data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += t->numel();
  }
  return out;
}

void put_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void FusionConfig::validate() const {
  if (channels < 2 || channels % 2 != 0) throw std::invalid_argument("channels must be even and >= 2");
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("n1 and n2 must be positive");
  if (mlp_ratio == 0 || groups == 0 || d_state == 0) {
    throw std::invalid_argument("mlp_ratio, groups and d_state must be positive");
  }
  if (wavelet_length < 2 || wavelet_length % 2 != 0) throw std::invalid_argument("wavelet_length must be even");
  if (!(weights.ssim > 0.0 && weights.text > 0.0 && weights.intensity > 0.0)) {
    throw std::invalid_argument("loss weights must be positive");
  }
  if (!(k_sharp > 0.0)) throw std::invalid_argument("k_sharp must be positive");
}

ModelParams ModelParams::create(const FusionConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.channels;
  std::mt19937_64 rng(cfg.seed);
  ModelParams p;
  p.config = cfg;
  p.stem_w = Parameter("stem.w", fan_in_uniform({c, 1, 3, 3}, 9, rng));
  p.stem_b = Parameter("stem.b", fan_in_uniform({1, c, 1, 1}, 9, rng));
  p.adawat = AdaWatParams::create("adawat", c, cfg.wavelet_length);
  p.shallow_hi = make_stack("shallow_hi", cfg.n1, 3 * c, cfg, rng);
  p.shallow_lo = make_stack("shallow_lo", cfg.n1, c, cfg, rng);
  p.deep = make_stack("deep", cfg.n2, c, cfg, rng);
  // Every output pixel of the 2x2 stride-2 transposed conv sees exactly C inputs.
  p.head_up_w = Parameter("head.up.w", fan_in_uniform({c, c / 2, 2, 2}, c, rng));
  p.head_up_b = Parameter("head.up.b", fan_in_uniform({1, c / 2, 1, 1}, c, rng));
  p.head_out_w = Parameter("head.out.w", fan_in_uniform({1, c / 2, 3, 3}, 9 * c / 2, rng));
  p.head_out_b = Parameter("head.out.b", fan_in_uniform({1, 1, 1, 1}, 9 * c / 2, rng));
  return p;
}

std::vector<Parameter*> ModelParams::parameters() {
  std::vector<Parameter*> out{&stem_w, &stem_b};
  for (Parameter* q : adawat.parameters()) out.push_back(q);
  for (auto* stack : {&shallow_hi, &shallow_lo, &deep}) {
    for (SsdBlockParams& b : *stack) {
      for (Parameter* q : b.parameters()) out.push_back(q);
    }
  }
  for (Parameter* q : {&head_up_w, &head_up_b, &head_out_w, &head_out_b}) out.push_back(q);
  return out;
}

std::vector<const Parameter*> ModelParams::parameters() const {
  const auto mut = const_cast<ModelParams*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::size_t param_count(const ModelParams& p) {
  std::size_t n = 0;
  for (const Parameter* q : p.parameters()) n += q->value.numel();
  return n;
}

ad::Var embed(const ad::Var& i, ModelParams& p) {
  const Shape& s = i.shape();
  if (s.c != 1) throw ShapeError("embed: expected single-channel input, got " + s.str());
  if (s.h % 4 != 0 || s.w % 4 != 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("embed: height and width must be divisible by 4, got " + s.str() +
                     "; reflect-pad with pad_to_multiple first");
  }
  ad::Tape& tape = *i.tape();
  return ad::silu(ad::conv2d(i, tape.param(p.stem_w), tape.param(p.stem_b), kStemConv));
}

Tensor embed(const Tensor& i, ModelParams& p) {
  ad::Tape tape(false);
  return embed(tape.constant(i), p).value();
}

FusedBandVars freq_segmented_fuse(const SubbandVars& s1, const SubbandVars& s2) {
  for (const auto& [a, b] : {std::pair{&s1.ll, &s2.ll}, {&s1.lh, &s2.lh}, {&s1.hl, &s2.hl}, {&s1.hh, &s2.hh}}) {
    if (a->shape() != b->shape()) {
      throw ShapeError("freq_segmented_fuse: subband shapes differ: " + a->shape().str() + " vs " +
                       b->shape().str());
    }
  }
  return {ad::concat_channels({ad::add(s1.lh, s2.lh), ad::add(s1.hl, s2.hl), ad::add(s1.hh, s2.hh)}),
          ad::add(s1.ll, s2.ll)};
}

FusedBands freq_segmented_fuse(const SubbandSet& s1, const SubbandSet& s2) {
  ad::Tape tape(false);
  const auto vars = [&tape](const SubbandSet& s) {
    return SubbandVars{tape.constant(s.ll), tape.constant(s.lh), tape.constant(s.hl), tape.constant(s.hh)};
  };
  const FusedBandVars f = freq_segmented_fuse(vars(s1), vars(s2));
  return {f.hi.value(), f.lo.value()};
}

ad::Var fuse(ad::Tape& tape, const ad::Var& i1, const ad::Var& i2, ModelParams& p, MaskMode mask) {
  if (i1.shape() != i2.shape()) {
    throw ShapeError("fuse: source shapes differ: " + i1.shape().str() + " vs " + i2.shape().str());
  }
  const std::size_t c = p.config.channels;
  const Shape& s = i1.shape();
  const BlockOptions opt{.mask = mask, .k_sharp = p.config.k_sharp, .dirs = all_scan_dirs()};

  const ad::Var e1 = checked(embed(i1, p), "embed");
  const ad::Var e2 = checked(embed(i2, p), "embed");
  const SubbandVars b1 = adawat_forward(tape, e1, p.adawat, true);
  const SubbandVars b2 = adawat_forward(tape, e2, p.adawat, true);
  const FusedBandVars bands = freq_segmented_fuse(b1, b2);
  ad::Var hi = checked(bands.hi, "adawat");
  ad::Var lo = checked(bands.lo, "adawat");
  for (std::size_t k = 0; k < p.shallow_hi.size(); ++k) {
    hi = checked(block_forward(tape, hi, p.shallow_hi[k], opt), "shallow_hi." + std::to_string(k));
  }
  for (std::size_t k = 0; k < p.shallow_lo.size(); ++k) {
    lo = checked(block_forward(tape, lo, p.shallow_lo[k], opt), "shallow_lo." + std::to_string(k));
  }
  const SubbandVars merged{lo, ad::slice_channels(hi, 0, c), ad::slice_channels(hi, c, c),
                           ad::slice_channels(hi, 2 * c, c)};
  ad::Var d = checked(adaiwat(tape, merged, p.adawat), "adaiwat");
  for (std::size_t k = 0; k < p.deep.size(); ++k) {
    d = checked(block_forward(tape, d, p.deep[k], opt), "deep." + std::to_string(k));
  }
  const ad::Var b_up = tape.param(p.head_up_b);
  const ad::Var up = ad::silu(ad::conv_transpose2d(d, tape.param(p.head_up_w), &b_up, kHeadUpConv, s.h, s.w));
  const ad::Var z = ad::conv2d(up, tape.param(p.head_out_w), tape.param(p.head_out_b), kHeadOutConv);
  return checked(ad::scale(ad::add_scalar(ad::tanh(z), 1.0), 0.5), "head");
}

Tensor fuse(const Tensor& i1, const Tensor& i2, ModelParams& p, MaskMode mask) {
  ad::Tape tape(false);
  return fuse(tape, tape.constant(i1), tape.constant(i2), p, mask).value();
}

std::vector<LossRecord> train_toy(ModelParams& p, TrainState& state, const std::vector<ImagePair>& pairs,
                                  const TrainConfig& tc) {
  if (pairs.empty()) throw std::invalid_argument("train_toy: empty dataset");
  for (const ImagePair& ip : pairs) {
    require_same_shape(ip.a, ip.b, "train_toy");
    require_same_shape(pairs.front().a, ip.a, "train_toy");
  }
  const Shape s = pairs.front().a.shape();
  if (tc.patch > 0 && (tc.patch > s.h || tc.patch > s.w || tc.patch % 4 != 0)) {
    throw std::invalid_argument("train_toy: patch must be a multiple of 4 no larger than the images");
  }
  const std::size_t batch = tc.batch == 0 ? pairs.size() : std::min(tc.batch, pairs.size());
  std::vector<Parameter*> params = p.parameters();
  state.adam.lr = tc.lr;
  std::vector<LossRecord> records;
  records.reserve(tc.steps);
  for (std::size_t it = 0; it < tc.steps; ++it) {
    const std::uint64_t step = state.adam.step + 1;
    // Crops depend only on seed and step so a resumed run sees the same data.
    std::mt19937_64 rng(p.config.seed ^ (0x9e3779b97f4a7c15ULL * step));
    std::vector<Tensor> as;
    std::vector<Tensor> bs;
    for (std::size_t k = 0; k < batch; ++k) {
      const ImagePair& ip = pairs[((step - 1) * batch + k) % pairs.size()];
      if (tc.patch == 0) {
        as.push_back(ip.a);
        bs.push_back(ip.b);
        continue;
      }
      const std::size_t i = std::uniform_int_distribution<std::size_t>(0, s.h - tc.patch)(rng);
      const std::size_t j = std::uniform_int_distribution<std::size_t>(0, s.w - tc.patch)(rng);
      as.push_back(crop(ip.a, i, j, tc.patch, tc.patch));
      bs.push_back(crop(ip.b, i, j, tc.patch, tc.patch));
    }
    std::vector<const Tensor*> pa;
    std::vector<const Tensor*> pb;
    for (std::size_t k = 0; k < batch; ++k) {
      pa.push_back(&as[k]);
      pb.push_back(&bs[k]);
    }
    const Tensor i1 = stack_batch(pa);
    const Tensor i2 = stack_batch(pb);

    ad::zero_grad(params);
    ad::Tape tape;
    const ad::Var f = fuse(tape, tape.constant(i1), tape.constant(i2), p, MaskMode::Soft);
    const LossVars loss = total_loss(f, i1, i2, p.config.weights, p.config.aggregation);
    const LossReport report = loss.report(p.config.weights);
    if (!std::isfinite(report.l_total)) throw NumericError("loss", "train_toy: non-finite loss at step " +
                                                                       std::to_string(step));
    tape.backward(loss.total);
    ad::adam_step(state.adam, params);

    state.ema_value = tc.ema * state.ema_value + (1.0 - tc.ema) * report.l_total;
    state.ema_weight = tc.ema * state.ema_weight + (1.0 - tc.ema);
    records.push_back({step, report, state.ema_value / state.ema_weight});
  }
  return records;
}

std::string config_to_text(const FusionConfig& cfg) {
  std::ostringstream os;
  os << "channels=" << cfg.channels << "\n"
     << "n1=" << cfg.n1 << "\n"
     << "n2=" << cfg.n2 << "\n"
     << "mlp_ratio=" << cfg.mlp_ratio << "\n"
     << "wavelet_length=" << cfg.wavelet_length << "\n"
     << "c_prime=" << cfg.resolved_c_prime() << "\n"
     << "groups=" << cfg.groups << "\n"
     << "d_state=" << cfg.d_state << "\n"
     << "mu_ssim=" << format_double(cfg.weights.ssim) << "\n"
     << "mu_text=" << format_double(cfg.weights.text) << "\n"
     << "mu_int=" << format_double(cfg.weights.intensity) << "\n"
     << "aggregation=" << (cfg.aggregation == Aggregation::Max ? "max" : "mean") << "\n"
     << "seed=" << cfg.seed << "\n"
     << "k_sharp=" << format_double(cfg.k_sharp) << "\n";
  return os.str();
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& p, const TrainState* state) {
  const auto params = p.parameters();
  const bool moments = state != nullptr && state->adam.m.size() == params.size();
  std::ostringstream head;
  head << kCheckpointMagic << "\n[config]\n" << config_to_text(p.config) << "[state]\n";
  head << "step=" << (state ? state->adam.step : 0) << "\n";
  head << "ema_value=" << format_double(state ? state->ema_value : 0.0) << "\n";
  head << "ema_weight=" << format_double(state ? state->ema_weight : 0.0) << "\n";
  head << "adam_moments=" << (moments ? 1 : 0) << "\n";
  head << "[params] " << params.size() << "\n";
  for (const Parameter* q : params) {
    const Shape& s = q->value.shape();
    head << q->name() << " " << s.n << " " << s.c << " " << s.h << " " << s.w << "\n";
  }
  head << "end\n";
  std::string bytes = head.str();
  const auto emit = [&bytes](const Tensor& t) {
    for (double v : t.data()) put_le(bytes, v);
  };
  for (const Parameter* q : params) emit(q->value);
  if (moments) {
    for (const Tensor& t : state->adam.m) emit(t);
    for (const Tensor& t : state->adam.v) emit(t);
  }
  atomic_write(path, bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open checkpoint");
  const std::string src = path.string();
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) throw FormatError(src + ": not an adasffuse checkpoint");
  if (!std::getline(in, line) || line != "[config]") throw FormatError(src + ": missing [config] section");
  std::string config_text;
  while (std::getline(in, line) && line != "[state]") config_text += line + "\n";
  if (!in) throw FormatError(src + ": missing [state] section");
  RunSettings settings;
  apply_config_text(settings, config_text, src);

  Checkpoint ck{ModelParams::create(settings.model), {}};
  std::size_t moments = 0;
  const auto state_value = [&](const std::string& key) {
    if (!std::getline(in, line) || line.rfind(key + "=", 0) != 0) {
      throw FormatError(src + ": expected '" + key + "=' in [state]");
    }
    return line.substr(key.size() + 1);
  };
  try {
    ck.state.adam.step = std::stoull(state_value("step"));
    ck.state.ema_value = std::stod(state_value("ema_value"));
    ck.state.ema_weight = std::stod(state_value("ema_weight"));
    moments = std::stoul(state_value("adam_moments"));
  } catch (const std::logic_error&) {
    throw FormatError(src + ": malformed [state] value");
  }

  const auto params = ck.params.parameters();
  if (!std::getline(in, line) || line != "[params] " + std::to_string(params.size())) {
    throw FormatError(src + ": parameter count disagrees with the config (expected " +
                      std::to_string(params.size()) + ")");
  }
  for (const Parameter* q : params) {
    if (!std::getline(in, line)) throw FormatError(src + ": truncated manifest");
    std::istringstream ls(line);
    std::string name;
    Shape s;
    if (!(ls >> name >> s.n >> s.c >> s.h >> s.w)) throw FormatError(src + ": malformed manifest line '" + line + "'");
    if (name != q->name() || s != q->value.shape()) {
      throw FormatError(src + ": manifest entry '" + line + "' does not match expected " + q->name() + " " +
                        q->value.shape().str());
    }
  }
  if (!std::getline(in, line) || line != "end") throw FormatError(src + ": missing manifest terminator");

  std::size_t total = 0;
  for (const Parameter* q : params) total += q->value.numel();
  const std::size_t expected = 8 * total * (moments ? 3 : 1);
  const std::string payload{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (payload.size() != expected) {
    throw FormatError(src + ": payload is " + std::to_string(payload.size()) + " bytes, expected " +
                      std::to_string(expected));
  }
  const auto* cursor = reinterpret_cast<const unsigned char*>(payload.data());
  const auto fill = [&cursor](Tensor& t) {
    for (double& v : t.data()) {
      v = get_le(cursor);
      cursor += 8;
    }
  };
  for (Parameter* q : params) fill(q->value);
  if (moments) {
    for (auto* set : {&ck.state.adam.m, &ck.state.adam.v}) {
      for (Parameter* q : params) {
        set->emplace_back(q->value.shape());
        fill(set->back());
      }
    }
  }
  return ck;
}

const ParamCheck& GradcheckReport::worst() const {
  if (params.empty()) throw std::logic_error("GradcheckReport::worst: empty report");
  return *std::max_element(params.begin(), params.end(), [](const ParamCheck& a, const ParamCheck& b) {
    return a.max_rel_error < b.max_rel_error;
  });
}

GradcheckReport gradcheck_model(const FusionConfig& cfg, std::size_t h, std::size_t w,
                                const std::function<void(const ParamCheck&)>& progress) {
  ModelParams p = ModelParams::create(cfg);
  std::mt19937_64 rng(cfg.seed + 1);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  // Move every parameter off its init so zero-initialized residual paths carry gradient.
  for (Parameter* q : p.parameters()) {
    const std::string& n = q->name();
    const bool wavelet = n.ends_with(".u0") || n.ends_with(".u1") || n.ends_with(".s0") || n.ends_with(".s1");
    const bool norm_scale = n.ends_with("norm1.w") || n.ends_with("norm2.w");
    for (double& v : q->value.data()) {
      if (wavelet) {
        v += 0.1 * unit(rng);
      } else if (norm_scale) {
        v = 1.0 + 0.2 * unit(rng);
      } else {
        v = 0.5 * unit(rng);
      }
    }
  }
  Tensor i1({1, 1, h, w});
  Tensor i2({1, 1, h, w});
  std::uniform_real_distribution<double> pix(0.0, 1.0);
  for (double& v : i1.data()) v = pix(rng);
  for (double& v : i2.data()) v = pix(rng);

  const ad::LossFn loss = [&](ad::Tape& tape) {
    const ad::Var f = fuse(tape, tape.constant(i1), tape.constant(i2), p, MaskMode::Soft);
    return total_loss(f, i1, i2, cfg.weights, cfg.aggregation).total;
  };
  GradcheckReport report;
  for (Parameter* q : p.parameters()) {
    const ad::GradCheckResult r = ad::finite_diff_check(loss, *q, 1e-4, ad::FdScheme::Richardson);
    report.params.push_back({q->name(), r.max_rel_error, r.worst_index});
    if (progress) progress(report.params.back());
  }
  return report;
}

}  // namespace adasf
