#include "adasf/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace adasf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw FormatError("config key '" + key + "': bad value '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw FormatError("config key '" + key + "': bad value '" + v + "'");
  return out;
}

using Setter = std::function<void(RunSettings&, const std::string&, const std::string&)>;

template <typename T, typename Field>
Setter integer(Field field) {
  return [field](RunSettings& s, const std::string& k, const std::string& v) { field(s) = parse_number<T>(k, v); };
}

template <typename Field>
Setter real(Field field) {
  return [field](RunSettings& s, const std::string& k, const std::string& v) { field(s) = parse_double(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"channels", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.model.channels; })},
      {"n1", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.model.n1; })},
      {"n2", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.model.n2; })},
      {"mlp_ratio", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.model.mlp_ratio; })},
      {"wavelet_length",
       integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.model.wavelet_length; })},
      {"c_prime", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.model.c_prime; })},
      {"groups", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.model.groups; })},
      {"d_state", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.model.d_state; })},
      {"mu_ssim", real([](RunSettings& s) -> double& { return s.model.weights.ssim; })},
      {"mu_text", real([](RunSettings& s) -> double& { return s.model.weights.text; })},
      {"mu_int", real([](RunSettings& s) -> double& { return s.model.weights.intensity; })},
      {"aggregation",
       [](RunSettings& s, const std::string& k, const std::string& v) {
         if (v == "max") {
           s.model.aggregation = Aggregation::Max;
         } else if (v == "mean") {
           s.model.aggregation = Aggregation::Mean;
         } else {
           throw FormatError("config key '" + k + "': expected max or mean, got '" + v + "'");
         }
       }},
      {"seed", integer<std::uint64_t>([](RunSettings& s) -> std::uint64_t& { return s.model.seed; })},
      {"k_sharp", real([](RunSettings& s) -> double& { return s.model.k_sharp; })},
      {"steps", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.train.steps; })},
      {"lr", real([](RunSettings& s) -> double& { return s.train.lr; })},
      {"batch", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.train.batch; })},
      {"patch", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.train.patch; })},
      {"ema", real([](RunSettings& s) -> double& { return s.train.ema; })},
      {"gradcheck_height", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.gradcheck.height; })},
      {"gradcheck_width", integer<std::size_t>([](RunSettings& s) -> std::size_t& { return s.gradcheck.width; })},
      {"gradcheck_threshold", real([](RunSettings& s) -> double& { return s.gradcheck.threshold; })},
  };
  return table;
}

}  // namespace

void apply_config_text(RunSettings& s, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw FormatError(where + "expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw FormatError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw FormatError(where + "duplicate key '" + key + "'");
    try {
      it->second(s, key, value);
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
  }
  try {
    s.model.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(source + ": " + e.what());
  }
  if (s.train.lr <= 0.0 || s.train.ema < 0.0 || s.train.ema >= 1.0) {
    throw FormatError(source + ": lr must be positive and ema in [0,1)");
  }
  if (s.gradcheck.height % 4 != 0 || s.gradcheck.width % 4 != 0 || s.gradcheck.height == 0 ||
      s.gradcheck.width == 0) {
    throw FormatError(source + ": gradcheck sizes must be positive multiples of 4");
  }
}

RunSettings load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  RunSettings s;
  apply_config_text(s, ss.str(), path);
  return s;
}

RunSettings micro_settings() {
  RunSettings s;
  s.model.channels = 4;
  s.model.n1 = 1;
  s.model.n2 = 1;
  return s;
}

std::string settings_to_text(const RunSettings& s) {
  std::ostringstream os;
  os.precision(17);
  os << config_to_text(s.model);
  os << "steps=" << s.train.steps << "\n"
     << "lr=" << s.train.lr << "\n"
     << "batch=" << s.train.batch << "\n"
     << "patch=" << s.train.patch << "\n"
     << "ema=" << s.train.ema << "\n"
     << "gradcheck_height=" << s.gradcheck.height << "\n"
     << "gradcheck_width=" << s.gradcheck.width << "\n"
     << "gradcheck_threshold=" << s.gradcheck.threshold << "\n";
  return os.str();
}

}  // namespace adasf
