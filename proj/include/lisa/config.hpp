#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "lisa/attention.hpp"
#include "lisa/quantizer.hpp"

namespace lisa {

enum class ForwardVariant { base, soft };

struct ForwardConfig {
  AttentionMode mode = AttentionMode::unidirectional;
  ForwardVariant variant = ForwardVariant::base;
  /// Query-key scale; unset means 1/sqrt(D).
  std::optional<double> scale;
};

struct RunConfig {
  FitOptions fit;
  ForwardConfig forward;
};

/// Parses a JSON document of the form
///   {"fit": {"B": 8, "W": 256, "iters": 25, "seed": 0, "temperature": 1.0},
///    "forward": {"mode": "uni", "variant": "base", "scale": "rsqrt_d"}}
/// Every key is optional; unknown keys are rejected with InvalidInput.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

ForwardVariant parse_forward_variant(const std::string& name);

}  // namespace lisa
