#include "divakit/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace divakit::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T number(std::string_view v, int line, std::string_view key) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ValidationError("config line " + std::to_string(line) + ": bad value '" + std::string(v) +
                          "' for " + std::string(key));
  }
  return out;
}

bool boolean(std::string_view v, int line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config line " + std::to_string(line) + ": expected true/false, got '" +
                        std::string(v) + "'");
}

}  // namespace

RunConfig parse_config(std::string_view text, RunConfig cfg) {
  auto& e = cfg.engine;
  auto& c = cfg.engine.control;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config line " + std::to_string(line) + ": expected 'key = value'");
    }
    const std::string_view key = trim(s.substr(0, eq));
    const std::string_view val = trim(s.substr(eq + 1));
    if (key == "frame_ms") e.frame_ms = number<double>(val, line, key);
    else if (key == "fs") e.fs = number<double>(val, line, key);
    else if (key == "aud_delay") e.aud_delay = number<int>(val, line, key);
    else if (key == "som_delay") e.som_delay = number<int>(val, line, key);
    else if (key == "g_aud") c.g_aud = number<double>(val, line, key);
    else if (key == "g_som") c.g_som = number<double>(val, line, key);
    else if (key == "damping") c.damping_rel = number<double>(val, line, key);
    else if (key == "learn_rate") c.learn_rate = number<double>(val, line, key);
    else if (key == "learn_aim") c.learn_aim = number<double>(val, line, key);
    else if (key == "fd_eps") c.fd_eps = number<double>(val, line, key);
    else if (key == "seed") e.seed = number<std::uint64_t>(val, line, key);
    else if (key == "deterministic") e.deterministic = boolean(val, line);
    else if (key == "basis") cfg.basis_path = std::filesystem::path(std::string(val));
    else if (key == "smoothing") {
      std::vector<double> taps;
      std::string_view rest = val;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        taps.push_back(number<double>(trim(rest.substr(0, comma)), line, key));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
      c.smoothing_taps = std::move(taps);
    } else {
      throw ValidationError("config line " + std::to_string(line) + ": unknown key '" +
                            std::string(key) + "'");
    }
  }
  e.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::optional<std::filesystem::path> data_dir() {
  const char* env = std::getenv("DIVAKIT_DATA");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return std::filesystem::path(env);
}

tract::TractBasis resolve_basis(const RunConfig& cfg) {
  if (cfg.basis_path) return tract::load_basis(*cfg.basis_path);
  if (const auto dir = data_dir()) {
    const auto candidate = *dir / "tract_basis.csv";
    if (std::filesystem::exists(candidate)) return tract::load_basis(candidate);
  }
  return tract::default_basis();
}

}  // namespace divakit::config
