#pragma once

// Key-value run configuration and data-directory resolution.
//
//   # comment
//   frame_ms = 5
//   aud_delay = 15
//   smoothing = 0.25, 0.5, 0.25
//   deterministic = true
//   basis = /path/to/tract_basis.csv
//
// Keys: frame_ms fs aud_delay som_delay g_aud g_som damping learn_rate
// learn_aim fd_eps smoothing seed deterministic basis. Unknown keys are errors.

#include "divakit/engine.hpp"

#include <filesystem>
#include <optional>
#include <string_view>

namespace divakit::config {

struct RunConfig {
  engine::EngineConfig engine{};
  std::optional<std::filesystem::path> basis_path;
};

/// Applies every `key = value` line of `text` on top of `base`.
/// Throws ValidationError naming the line on a bad key or value.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// $DIVAKIT_DATA if set and non-empty.
std::optional<std::filesystem::path> data_dir();

/// Basis from the explicit path, else `<data_dir>/tract_basis.csv` if it
/// exists, else the built-in basis.
tract::TractBasis resolve_basis(const RunConfig& cfg);

}  // namespace divakit::config
