#include "adasf/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "adasf/config.hpp"
#include "adasf/fft.hpp"
#include "adasf/imageio.hpp"
#include "adasf/metrics.hpp"
#include "adasf/pipeline.hpp"

namespace adasf {

namespace fs = std::filesystem;

namespace {

/// Usage and I/O problems detected by the commands themselves.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

bool is_pnm(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

std::vector<std::string> pnm_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError(dir.string() + ": not a directory");
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_pnm(e.path())) names.push_back(e.path().filename().string());
  }
  std::ranges::sort(names);
  return names;
}

void log_settings(std::ostream& err, const std::string& text) {
  err << "# resolved config\n";
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) err << "#   " << line << "\n";
}

RunSettings settings_from(const std::string& config_path, const std::optional<std::uint64_t>& seed) {
  RunSettings s = config_path.empty() ? RunSettings{} : load_config(config_path);
  if (seed) s.model.seed = *seed;
  return s;
}

// Min-max normalized 8-bit rendering; a constant plane renders mid-gray.
Image render(const Tensor& x) {
  const auto [lo, hi] = std::ranges::minmax(x.data());
  Tensor n(x.shape(), 0.5);
  if (hi > lo) {
    for (std::size_t i = 0; i < x.numel(); ++i) n[i] = (x[i] - lo) / (hi - lo);
  }
  return to_gray_image(n);
}

// log(1 + |F|) with the zero frequency moved to the centre.
Tensor log_spectrum(const Tensor& x) {
  const Spectrum s = fft2(x);
  const Shape& sh = x.shape();
  Tensor out(sh);
  for (std::size_t i = 0; i < sh.h; ++i) {
    for (std::size_t j = 0; j < sh.w; ++j) {
      const std::size_t src = i * sh.w + j;
      const std::size_t di = (i + sh.h / 2) % sh.h;
      const std::size_t dj = (j + sh.w / 2) % sh.w;
      out[di * sh.w + dj] = std::log1p(std::hypot(s.re[src], s.im[src]));
    }
  }
  return out;
}

Tensor load_luminance(const fs::path& p) { return luminance(read_pnm(p)); }

int cmd_fuse(const fs::path& a_path, const fs::path& b_path, const fs::path& ckpt, const fs::path& out_path,
             const std::string& color, std::ostream& err) {
  const Image a = read_pnm(a_path);
  const Image b = read_pnm(b_path);
  if (a.width != b.width || a.height != b.height) {
    throw UsageError("fuse: source sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
  Checkpoint ck = load_checkpoint(ckpt);
  log_settings(err, config_to_text(ck.params.config));
  const YCbCr ya = rgb_to_ycbcr(a);
  const YCbCr yb = rgb_to_ycbcr(b);
  const Padded pa = pad_to_multiple(ya.y, 4);
  const Padded pb = pad_to_multiple(yb.y, 4);
  const Tensor fused = crop_back(fuse(pa.tensor, pb.tensor, ck.params, MaskMode::Hard), pa.orig_h, pa.orig_w);
  if (color.empty()) {
    write_pnm(out_path, to_gray_image(fused));
  } else {
    const YCbCr& src = color == "a" ? ya : yb;
    write_pnm(out_path, ycbcr_to_rgb(fused, src.cb, src.cr));
  }
  err << "wrote " << out_path.string() << "\n";
  return kExitOk;
}

int cmd_decompose(const fs::path& in_path, const fs::path& ckpt, const fs::path& out_dir, std::size_t channel,
                  std::ostream& err) {
  const Tensor y = load_luminance(in_path);
  Checkpoint ck = load_checkpoint(ckpt);
  if (channel >= ck.params.config.channels) throw UsageError("decompose: --channel out of range");
  AdaWatParams slice = ck.params.adawat.channel_slice(channel);
  const Padded padded = pad_to_multiple(y, 2);
  const SubbandSet bands = adawat_forward(padded.tensor, slice, true);
  fs::create_directories(out_dir);
  const std::pair<const char*, const Tensor*> named[] = {
      {"ll", &bands.ll}, {"lh", &bands.lh}, {"hl", &bands.hl}, {"hh", &bands.hh}};
  for (const auto& [name, band] : named) {
    write_pnm(out_dir / (std::string(name) + ".pgm"), render(*band));
    write_pnm(out_dir / (std::string(name) + "_spectrum.pgm"), render(log_spectrum(*band)));
  }
  err << "wrote 8 images to " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_metrics(const fs::path& fused_dir, const fs::path& a_dir, const fs::path& b_dir, const fs::path& csv,
                std::ostream& err) {
  const std::vector<std::string> names = pnm_names(fused_dir);
  if (names.empty()) throw UsageError(fused_dir.string() + ": no PNM images");
  std::string out = "name,EN,SD,SF,MI,SCD,Qabf,SSIM,error\n";
  std::vector<MetricReport> reports;
  bool failed = false;
  for (const std::string& name : names) {
    try {
      for (const fs::path& d : {a_dir, b_dir}) {
        if (!fs::exists(d / name)) throw UsageError("missing counterpart " + (d / name).string());
      }
      const Tensor f = load_luminance(fused_dir / name);
      const Tensor a = load_luminance(a_dir / name);
      const Tensor b = load_luminance(b_dir / name);
      if (f.shape() != a.shape() || f.shape() != b.shape()) throw UsageError("image sizes differ");
      const MetricReport r = compute_metrics(f, a, b);
      reports.push_back(r);
      out += name + "," + fixed(r.en) + "," + fixed(r.sd) + "," + fixed(r.sf) + "," + fixed(r.mi) + "," +
             fixed(r.scd) + "," + fixed(r.qabf) + "," + fixed(r.ssim) + ",\n";
    } catch (const std::exception& e) {
      failed = true;
      std::string msg = e.what();
      std::ranges::replace(msg, ',', ';');
      out += name + ",,,,,,,," + msg + "\n";
      err << name << ": " << e.what() << "\n";
    }
  }
  if (!reports.empty()) {
    const MetricReport m = mean_report(reports);
    out += "mean," + fixed(m.en) + "," + fixed(m.sd) + "," + fixed(m.sf) + "," + fixed(m.mi) + "," + fixed(m.scd) +
           "," + fixed(m.qabf) + "," + fixed(m.ssim) + ",\n";
  } else {
    out += "mean,,,,,,,,no valid items\n";
  }
  atomic_write(csv, out);
  err << "wrote " << csv.string() << "\n";
  return failed ? kExitFailure : kExitOk;
}

int cmd_gradcheck(const RunSettings& s, const std::optional<double>& threshold, const std::string& report_path,
                  std::ostream& out, std::ostream& err) {
  const double limit = threshold.value_or(s.gradcheck.threshold);
  log_settings(err, settings_to_text(s));
  const GradcheckReport r = gradcheck_model(s.model, s.gradcheck.height, s.gradcheck.width,
                                            [&out](const ParamCheck& c) {
                                              char buf[160];
                                              std::snprintf(buf, sizeof buf, "%-28s %.3e\n", c.name.c_str(),
                                                            c.max_rel_error);
                                              out << buf << std::flush;
                                            });
  const ParamCheck& worst = r.worst();
  const bool pass = worst.max_rel_error < limit;
  out << "worst " << worst.name << "[" << worst.worst_index << "] " << worst.max_rel_error << " threshold " << limit
      << " " << (pass ? "PASS" : "FAIL") << "\n";
  if (!report_path.empty()) {
    nlohmann::json j;
    j["threshold"] = limit;
    j["pass"] = pass;
    j["worst"] = {{"name", worst.name}, {"index", worst.worst_index}, {"max_rel_error", worst.max_rel_error}};
    for (const ParamCheck& c : r.params) {
      j["params"].push_back({{"name", c.name}, {"index", c.worst_index}, {"max_rel_error", c.max_rel_error}});
    }
    atomic_write(report_path, j.dump(2) + "\n");
  }
  return pass ? kExitOk : kExitFailure;
}

std::vector<ImagePair> load_pairs(const fs::path& data) {
  const fs::path a_dir = data / "a";
  const fs::path b_dir = data / "b";
  if (!fs::is_directory(a_dir) || !fs::is_directory(b_dir)) {
    throw UsageError(data.string() + ": expected subdirectories a/ and b/ with matching file names");
  }
  std::vector<ImagePair> pairs;
  for (const std::string& name : pnm_names(a_dir)) {
    if (!fs::exists(b_dir / name)) throw UsageError("missing counterpart " + (b_dir / name).string());
    const Tensor a = load_luminance(a_dir / name);
    const Tensor b = load_luminance(b_dir / name);
    if (a.shape() != b.shape()) throw UsageError(name + ": source sizes differ");
    pairs.push_back({pad_to_multiple(a, 4).tensor, pad_to_multiple(b, 4).tensor});
  }
  if (pairs.empty()) throw UsageError(data.string() + ": no training pairs");
  for (const ImagePair& p : pairs) {
    if (p.a.shape() != pairs.front().a.shape()) throw UsageError("training images must share one size");
  }
  return pairs;
}

int cmd_train(const fs::path& data, RunSettings s, const fs::path& out_path, const std::string& resume,
              const std::string& loss_csv, std::ostream& err) {
  const std::vector<ImagePair> pairs = load_pairs(data);
  Checkpoint ck = resume.empty() ? Checkpoint{ModelParams::create(s.model), {}} : load_checkpoint(resume);
  s.model = ck.params.config;
  log_settings(err, settings_to_text(s));
  const std::vector<LossRecord> records = train_toy(ck.params, ck.state, pairs, s.train);
  std::string csv = "step,l_ssim,l_text,l_int,l_total,smoothed\n";
  for (const LossRecord& r : records) {
    csv += std::to_string(r.step) + "," + fixed(r.loss.l_ssim, 9) + "," + fixed(r.loss.l_text, 9) + "," +
           fixed(r.loss.l_int, 9) + "," + fixed(r.loss.l_total, 9) + "," + fixed(r.smoothed, 9) + "\n";
  }
  save_checkpoint(out_path, ck.params, &ck.state);
  const fs::path csv_path = loss_csv.empty() ? fs::path(out_path.string() + ".loss.csv") : fs::path(loss_csv);
  atomic_write(csv_path, csv);
  if (!records.empty()) {
    err << "steps " << records.front().step << ".." << records.back().step << " l_total "
        << fixed(records.front().loss.l_total) << " -> " << fixed(records.back().loss.l_total) << " (smoothed "
        << fixed(records.back().smoothed) << ")\n";
  }
  err << "wrote " << out_path.string() << " and " << csv_path.string() << "\n";
  return kExitOk;
}

int cmd_info(const fs::path& ckpt, bool as_json, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(ckpt);
  const std::size_t count = param_count(ck.params);
  if (as_json) {
    nlohmann::json j;
    std::istringstream in(config_to_text(ck.params.config));
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      j["config"][line.substr(0, eq)] = line.substr(eq + 1);
    }
    j["step"] = ck.state.adam.step;
    j["param_count"] = count;
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << config_to_text(ck.params.config) << "step=" << ck.state.adam.step << "\nparam_count=" << count << "\n";
  return kExitOk;
}

int cmd_init(const RunSettings& s, const fs::path& out_path, std::ostream& err) {
  log_settings(err, settings_to_text(s));
  save_checkpoint(out_path, ModelParams::create(s.model));
  err << "wrote " << out_path.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial-frequency image fusion", "adasffuse"};
  app.require_subcommand(1);

  std::string a;
  std::string b;
  std::string ckpt;
  std::string output;
  std::string color;
  std::string input;
  std::string config;
  std::string data;
  std::string resume;
  std::string loss_csv;
  std::string report;
  std::string fused_dir;
  std::string csv;
  std::size_t channel = 0;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  bool as_json = false;

  CLI::App* fuse_cmd = app.add_subcommand("fuse", "Fuse two aligned images");
  fuse_cmd->add_option("--a", a, "First source image (PGM/PPM)")->required();
  fuse_cmd->add_option("--b", b, "Second source image (PGM/PPM)")->required();
  fuse_cmd->add_option("--ckpt", ckpt, "Model checkpoint")->required();
  fuse_cmd->add_option("--out", output, "Output image")->required();
  fuse_cmd->add_option("--color", color, "Recombine the chroma of source a or b (writes PPM)")
      ->check(CLI::IsMember({"a", "b"}));

  CLI::App* dec_cmd = app.add_subcommand("decompose", "Write wavelet subbands and their spectra");
  dec_cmd->add_option("--in", input, "Input image")->required();
  dec_cmd->add_option("--ckpt", ckpt, "Model checkpoint")->required();
  dec_cmd->add_option("--out", output, "Output directory")->required();
  dec_cmd->add_option("--channel", channel, "Enhancement channel to use");

  CLI::App* met_cmd = app.add_subcommand("metrics", "Batch fusion metrics to CSV");
  met_cmd->add_option("--fused", fused_dir, "Directory of fused images")->required();
  met_cmd->add_option("--a", a, "Directory of first sources")->required();
  met_cmd->add_option("--b", b, "Directory of second sources")->required();
  met_cmd->add_option("--csv", csv, "Output CSV")->required();

  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every model gradient");
  grad_cmd->add_option("--config", config, "Config file (defaults to the micro model)");
  grad_cmd->add_option("--threshold", threshold, "Maximum relative error");
  grad_cmd->add_option("--report", report, "Write a JSON report");

  CLI::App* train_cmd = app.add_subcommand("train", "Toy trainer");
  train_cmd->add_option("--data", data, "Directory with a/ and b/ subdirectories")->required();
  train_cmd->add_option("--config", config, "Config file");
  train_cmd->add_option("--out", output, "Output checkpoint")->required();
  train_cmd->add_option("--resume", resume, "Continue from this checkpoint");
  train_cmd->add_option("--seed", seed, "Override the config seed");
  train_cmd->add_option("--loss-csv", loss_csv, "Loss CSV path (default <out>.loss.csv)");

  CLI::App* info_cmd = app.add_subcommand("info", "Describe a checkpoint");
  info_cmd->add_option("--ckpt", ckpt, "Model checkpoint")->required();
  info_cmd->add_flag("--json", as_json, "JSON output");

  CLI::App* init_cmd = app.add_subcommand("init", "Write a freshly initialized checkpoint");
  init_cmd->add_option("--config", config, "Config file");
  init_cmd->add_option("--seed", seed, "Override the config seed");
  init_cmd->add_option("--out", output, "Output checkpoint")->required();

  std::vector<const char*> argv;
  for (const std::string& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (fuse_cmd->parsed()) return cmd_fuse(a, b, ckpt, output, color, err);
    if (dec_cmd->parsed()) return cmd_decompose(input, ckpt, output, channel, err);
    if (met_cmd->parsed()) return cmd_metrics(fused_dir, a, b, csv, err);
    if (grad_cmd->parsed()) {
      RunSettings s = config.empty() ? micro_settings() : load_config(config);
      return cmd_gradcheck(s, threshold, report, out, err);
    }
    if (train_cmd->parsed()) return cmd_train(data, settings_from(config, seed), output, resume, loss_csv, err);
    if (info_cmd->parsed()) return cmd_info(ckpt, as_json, out);
    if (init_cmd->parsed()) return cmd_init(settings_from(config, seed), output, err);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace adasf
