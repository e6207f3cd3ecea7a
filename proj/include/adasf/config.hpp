#pragma once

#include <cstddef>
#include <string>

#include "adasf/pipeline.hpp"

namespace adasf {

struct GradcheckSettings {
  std::size_t height = 16;
  std::size_t width = 16;
  double threshold = 1e-4;
};

/// Everything a run can be configured with.
struct RunSettings {
  FusionConfig model;
  TrainConfig train;
  GradcheckSettings gradcheck;
};

/// Applies `key=value` lines on top of `s`. Blank lines and `#` comments are
/// ignored; unknown keys, duplicates and malformed values throw FormatError.
void apply_config_text(RunSettings& s, const std::string& text, const std::string& source = "<config>");
RunSettings load_config(const std::string& path);

/// Micro model used by the gradient suite: C=4, N1=N2=1.
RunSettings micro_settings();

/// Fully resolved key=value dump, one per line, in a fixed order.
std::string settings_to_text(const RunSettings& s);

}  // namespace adasf
