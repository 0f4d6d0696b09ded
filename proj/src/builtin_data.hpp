#pragma once

// Data files embedded at configure time (see cmake/EmbedData.cmake).

#include <span>
#include <string_view>

namespace divakit::data {

struct EmbeddedFile {
  std::string_view name;  // file stem, e.g. "ae"
  std::string_view text;
};

std::span<const EmbeddedFile> builtin_target_files();
std::span<const EmbeddedFile> builtin_program_files();
std::string_view default_basis_csv();

}  // namespace divakit::data
