#include "divakit/targets.hpp"

#include "builtin_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace divakit::targets {

namespace {

constexpr std::array<std::string_view, kDimCount> kDimNames{
    "F0", "F1", "F2", "F3", "PA1", "PA2", "PA3", "PA4", "PA5", "PA6", "pressure", "voicing"};

struct Token {
  std::string_view text;
  int column;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back({line.substr(i, j - i), static_cast<int>(i) + 1});
    i = j;
  }
  return out;
}

[[noreturn]] void fail(Diagnostic kind, int line, int column, const std::string& msg) {
  throw TargetError(kind, line, column, msg);
}

double parse_number(const Token& tok, int line) {
  double v = 0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::general);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    fail(Diagnostic::bad_number, line, tok.column, "invalid number '" + std::string(tok.text) + "'");
  }
  return v;
}

int parse_int(const Token& tok, int line) {
  int v = 0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    fail(Diagnostic::bad_number, line, tok.column, "invalid integer '" + std::string(tok.text) + "'");
  }
  return v;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct LocatedWindow {
  RegionWindow window;
  int line;
};

void check_window(const RegionWindow& w, Dim dim, int duration, int line, int column) {
  const std::string dn(dim_name(dim));
  if (!(w.t_start < w.t_end)) {
    fail(Diagnostic::empty_interval, line, column,
         "window for " + dn + " has t_start >= t_end");
  }
  if (w.min > w.max) {
    fail(Diagnostic::min_greater_than_max, line, column,
         "window for " + dn + " has min " + format_number(w.min) + " > max " +
             format_number(w.max));
  }
  if (w.t_start < 0 || w.t_end > duration) {
    fail(Diagnostic::window_outside_duration, line, column,
         "window for " + dn + " lies outside [0, " + std::to_string(duration) + "] ms");
  }
}

void check_header(int duration, int frame, int duration_line, int frame_line) {
  if (duration <= 0) fail(Diagnostic::bad_duration, duration_line, 1, "duration_ms must be positive");
  if (frame <= 0 || duration % frame != 0) {
    fail(Diagnostic::bad_frame_period, frame_line, 1, "frame_ms must be positive and divide duration_ms");
  }
}

void sort_and_check_overlaps(Dim dim, std::vector<LocatedWindow>& windows) {
  std::stable_sort(windows.begin(), windows.end(),
                   [](const auto& a, const auto& b) { return a.window.t_start < b.window.t_start; });
  for (std::size_t i = 1; i < windows.size(); ++i) {
    if (windows[i].window.t_start < windows[i - 1].window.t_end) {
      const int line = std::max(windows[i].line, windows[i - 1].line);
      fail(Diagnostic::overlapping_windows, line, 1,
           "overlapping windows for " + std::string(dim_name(dim)));
    }
  }
}

int header_line(int frame_line, int duration_line) { return frame_line ? frame_line : duration_line; }

double lerp(double a, double b, double f) { return a + (b - a) * f; }

}  // namespace

std::string_view dim_name(Dim d) { return kDimNames[static_cast<int>(d)]; }

std::optional<Dim> dim_from_name(std::string_view name) {
  for (int i = 0; i < kDimCount; ++i) {
    if (kDimNames[i] == name) return static_cast<Dim>(i);
  }
  return std::nullopt;
}

std::string_view diagnostic_name(Diagnostic d) {
  switch (d) {
    case Diagnostic::syntax: return "syntax";
    case Diagnostic::bad_number: return "bad-number";
    case Diagnostic::missing_header: return "missing-header";
    case Diagnostic::duplicate_header: return "duplicate-header";
    case Diagnostic::unknown_dimension: return "unknown-dimension";
    case Diagnostic::min_greater_than_max: return "min-greater-than-max";
    case Diagnostic::empty_interval: return "empty-interval";
    case Diagnostic::overlapping_windows: return "overlapping-windows";
    case Diagnostic::window_outside_duration: return "window-outside-duration";
    case Diagnostic::bad_duration: return "bad-duration";
    case Diagnostic::bad_frame_period: return "bad-frame-period";
  }
  return "unknown";
}

TargetError::TargetError(Diagnostic kind, int line, int column, const std::string& message)
    : ValidationError((line > 0 ? "line " + std::to_string(line) + ":" + std::to_string(column) +
                                      ": "
                                : std::string()) +
                      std::string(diagnostic_name(kind)) + ": " + message),
      kind_(kind),
      line_(line),
      column_(column) {}

SpeechTarget parse_target(std::string_view text) {
  SpeechTarget target;
  bool have_name = false, have_duration = false, have_frame = false, seen_dim = false;
  int duration_line = 0, frame_line = 0;
  std::map<Dim, std::vector<LocatedWindow>> pending;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto toks = tokenize(line);
    if (toks.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    const std::string_view key = toks[0].text;

    if (key == "target") {
      if (have_name) fail(Diagnostic::duplicate_header, line_no, toks[0].column, "repeated 'target'");
      if (toks.size() != 2) fail(Diagnostic::syntax, line_no, toks[0].column, "expected 'target <name>'");
      target.name = std::string(toks[1].text);
      have_name = true;
    } else if (key == "duration_ms" || key == "frame_ms") {
      const bool is_duration = key == "duration_ms";
      if (!have_name) fail(Diagnostic::missing_header, line_no, toks[0].column, "'target <name>' must come first");
      if (seen_dim) fail(Diagnostic::syntax, line_no, toks[0].column, "header after window lines");
      if ((is_duration && have_duration) || (!is_duration && have_frame)) {
        fail(Diagnostic::duplicate_header, line_no, toks[0].column, "repeated '" + std::string(key) + "'");
      }
      if (!is_duration && !have_duration) {
        fail(Diagnostic::missing_header, line_no, toks[0].column, "'duration_ms' must precede 'frame_ms'");
      }
      if (toks.size() != 2) fail(Diagnostic::syntax, line_no, toks[0].column, "expected '" + std::string(key) + " <int>'");
      const int v = parse_int(toks[1], line_no);
      if (is_duration) {
        target.duration_ms = v;
        have_duration = true;
        duration_line = line_no;
      } else {
        target.frame_ms = v;
        have_frame = true;
        frame_line = line_no;
      }
    } else if (key == "dim") {
      if (!have_name || !have_duration) {
        fail(Diagnostic::missing_header, line_no, toks[0].column, "window before 'target' and 'duration_ms'");
      }
      if (!seen_dim) check_header(target.duration_ms, target.frame_ms, duration_line, header_line(frame_line, duration_line));
      seen_dim = true;
      if (toks.size() != 7 || toks[2].text != "window") {
        fail(Diagnostic::syntax, line_no, toks[0].column,
             "expected 'dim <name> window <t0_ms> <t1_ms> <min> <max>'");
      }
      const auto dim = dim_from_name(toks[1].text);
      if (!dim) {
        fail(Diagnostic::unknown_dimension, line_no, toks[1].column,
             "unknown dimension '" + std::string(toks[1].text) + "'");
      }
      RegionWindow w{parse_number(toks[3], line_no), parse_number(toks[4], line_no),
                     parse_number(toks[5], line_no), parse_number(toks[6], line_no)};
      check_window(w, *dim, target.duration_ms, line_no, toks[3].column);
      pending[*dim].push_back({w, line_no});
    } else {
      fail(Diagnostic::syntax, line_no, toks[0].column, "unknown keyword '" + std::string(key) + "'");
    }
    if (eol == text.size()) break;
  }

  if (!have_name) fail(Diagnostic::missing_header, line_no, 1, "missing 'target <name>'");
  if (!have_duration) fail(Diagnostic::missing_header, line_no, 1, "missing 'duration_ms <int>'");
  check_header(target.duration_ms, target.frame_ms, duration_line, header_line(frame_line, duration_line));

  for (auto& [dim, windows] : pending) {
    sort_and_check_overlaps(dim, windows);
    auto& out = target.dims[dim];
    for (const auto& lw : windows) out.push_back(lw.window);
  }
  return target;
}

void validate(const SpeechTarget& target) {
  if (target.name.empty() || target.name.find_first_of(" \t\n#") != std::string::npos) {
    fail(Diagnostic::syntax, 0, 0, "target name must be a non-empty token");
  }
  check_header(target.duration_ms, target.frame_ms, 0, 0);
  for (const auto& [dim, windows] : target.dims) {
    for (std::size_t i = 0; i < windows.size(); ++i) {
      check_window(windows[i], dim, target.duration_ms, 0, 0);
      if (i > 0 && windows[i].t_start < windows[i - 1].t_end) {
        fail(Diagnostic::overlapping_windows, 0, 0,
             "windows for " + std::string(dim_name(dim)) + " are unsorted or overlapping");
      }
    }
  }
}

std::string serialize_target(const SpeechTarget& target) {
  std::ostringstream out;
  out << "target " << target.name << '\n';
  out << "duration_ms " << target.duration_ms << '\n';
  out << "frame_ms " << target.frame_ms << '\n';
  for (const auto& [dim, windows] : target.dims) {
    auto sorted = windows;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.t_start < b.t_start; });
    for (const auto& w : sorted) {
      out << "dim " << dim_name(dim) << " window " << format_number(w.t_start) << ' '
          << format_number(w.t_end) << ' ' << format_number(w.min) << ' '
          << format_number(w.max) << '\n';
    }
  }
  return out.str();
}

std::optional<Region> region_at(const SpeechTarget& target, Dim dim, double time_ms) {
  if (!(time_ms >= 0 && time_ms <= target.duration_ms)) {
    throw ValidationError("time " + format_number(time_ms) + " ms outside [0, " +
                          std::to_string(target.duration_ms) + "] for target '" + target.name + "'");
  }
  auto it = target.dims.find(dim);
  if (it == target.dims.end() || it->second.empty()) return std::nullopt;
  const auto& ws = it->second;
  if (time_ms <= ws.front().t_start) return Region{ws.front().min, ws.front().max};
  if (time_ms >= ws.back().t_end) return Region{ws.back().min, ws.back().max};
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (time_ms <= ws[i].t_end) {
      if (time_ms >= ws[i].t_start) return Region{ws[i].min, ws[i].max};
      // Gap between ws[i-1] and ws[i]; i > 0 because time > front().t_start.
      const auto& a = ws[i - 1];
      const auto& b = ws[i];
      const double f = (time_ms - a.t_end) / (b.t_start - a.t_end);
      return Region{lerp(a.min, b.min, f), lerp(a.max, b.max, f)};
    }
  }
  return Region{ws.back().min, ws.back().max};
}

namespace {

double interp_track(const std::vector<double>& times, const std::vector<double>& values, double t) {
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  const double f = (t - times[lo]) / (times[hi] - times[lo]);
  return lerp(values[lo], values[hi], f);
}

bool sustained(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / n) <= kSustainedCv * mean;
}

RegionWindow tolerance_window(double t0, double t1, double v, double tol) {
  return {t0, t1, v - v * tol, v + v * tol};
}

}  // namespace

SpeechTarget target_from_formant_track(const FormantTrack& track, double rel_tolerance,
                                       int duration_ms, std::string name, int frame_ms) {
  const std::size_t n = track.times_ms.size();
  if (n == 0) throw ValidationError("formant track is empty");
  if (track.f0.size() != n || track.f1.size() != n || track.f2.size() != n || track.f3.size() != n) {
    throw ValidationError("formant track series have different lengths");
  }
  if (!(rel_tolerance >= 0)) throw ValidationError("tolerance must be >= 0");
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && !(track.times_ms[i] > track.times_ms[i - 1])) {
      throw ValidationError("formant track times must be strictly increasing");
    }
    for (double f : {track.f0[i], track.f1[i], track.f2[i], track.f3[i]}) {
      if (!(f > 0) || !std::isfinite(f)) throw ValidationError("formant track has a non-positive frequency");
    }
    if (!(track.f1[i] < track.f2[i] && track.f2[i] < track.f3[i])) {
      throw ValidationError("formant track violates F1 < F2 < F3 at sample " + std::to_string(i));
    }
  }

  SpeechTarget target;
  target.name = std::move(name);
  target.duration_ms = duration_ms;
  target.frame_ms = frame_ms;
  check_header(duration_ms, frame_ms, 0, 0);

  const std::array<const std::vector<double>*, 4> series{&track.f0, &track.f1, &track.f2, &track.f3};
  for (int d = 0; d < 4; ++d) {
    const auto& values = *series[d];
    auto& windows = target.dims[kAuditoryDims[d]];
    if (sustained(values)) {
      const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
      windows.push_back(tolerance_window(0, duration_ms, mean, rel_tolerance));
      continue;
    }
    for (double t0 = 0; t0 < duration_ms; t0 += kTrackSegmentMs) {
      const double t1 = std::min<double>(t0 + kTrackSegmentMs, duration_ms);
      double sum = 0;
      int count = 0;
      for (double t = t0; t < t1; t += frame_ms, ++count) {
        sum += interp_track(track.times_ms, values, t);
      }
      windows.push_back(tolerance_window(t0, t1, sum / count, rel_tolerance));
    }
  }
  target.dims[Dim::pressure] = {{0, static_cast<double>(duration_ms), 0.9, 1.0}};
  target.dims[Dim::voicing] = {{0, static_cast<double>(duration_ms), 0.9, 1.0}};
  return target;
}

const std::vector<SpeechTarget>& builtin_targets() {
  static const std::vector<SpeechTarget> targets = [] {
    std::vector<SpeechTarget> out;
    for (std::string_view name : {"i", "u", "e", "ae", "happy", "example"}) {
      for (const auto& file : data::builtin_target_files()) {
        if (file.name == name) out.push_back(parse_target(file.text));
      }
    }
    return out;
  }();
  return targets;
}

std::optional<SpeechTarget> find_builtin(std::string_view name) {
  for (const auto& t : builtin_targets()) {
    if (t.name == name) return t;
  }
  return std::nullopt;
}

}  // namespace divakit::targets
