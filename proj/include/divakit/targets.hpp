#pragma once

// Speech targets: per-dimension region windows over a production
// time-course, the plain-text target format, and construction of targets
// from measured formant tracks.

#include "divakit/core.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace divakit::targets {

/// Fixed dimension vocabulary, in canonical order.
enum class Dim { F0, F1, F2, F3, PA1, PA2, PA3, PA4, PA5, PA6, pressure, voicing };
inline constexpr int kDimCount = 12;

std::string_view dim_name(Dim d);
std::optional<Dim> dim_from_name(std::string_view name);

/// Auditory dims in the order of an AudVector; somatosensory dims in the
/// order of a SomVector.
inline constexpr std::array<Dim, 4> kAuditoryDims{Dim::F0, Dim::F1, Dim::F2, Dim::F3};
inline constexpr std::array<Dim, 8> kSomatoDims{Dim::PA1, Dim::PA2, Dim::PA3, Dim::PA4,
                                                Dim::PA5, Dim::PA6, Dim::pressure, Dim::voicing};

struct RegionWindow {
  double t_start = 0;  // ms
  double t_end = 0;    // ms
  double min = 0;
  double max = 0;

  bool operator==(const RegionWindow&) const = default;
};

struct SpeechTarget {
  std::string name;
  int duration_ms = 0;
  int frame_ms = 5;
  /// Windows per dimension, sorted by time and non-overlapping.
  std::map<Dim, std::vector<RegionWindow>> dims;

  bool operator==(const SpeechTarget&) const = default;

  int frame_count() const { return duration_ms / frame_ms; }
};

struct Region {
  double min;
  double max;
  bool operator==(const Region&) const = default;
};

/// Classes of diagnostics reported by the parser and the validator.
enum class Diagnostic {
  syntax,
  bad_number,
  missing_header,
  duplicate_header,
  unknown_dimension,
  min_greater_than_max,
  empty_interval,
  overlapping_windows,
  window_outside_duration,
  bad_duration,
  bad_frame_period,
};

std::string_view diagnostic_name(Diagnostic d);

class TargetError : public ValidationError {
 public:
  TargetError(Diagnostic kind, int line, int column, const std::string& message);
  Diagnostic kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  Diagnostic kind_;
  int line_;
  int column_;
};

/// Parse the line-oriented target format. Throws TargetError.
SpeechTarget parse_target(std::string_view text);

/// Canonical text: dims in vocabulary order, windows by start time,
/// shortest round-trip number formatting.
std::string serialize_target(const SpeechTarget& target);

/// Check every SpeechTarget invariant; throws TargetError (line 0) on failure.
void validate(const SpeechTarget& target);

/// Bounds of `dim` at `time_ms`. Inside a window its bounds; in a gap the
/// bounds are interpolated linearly; before the first / after the last
/// window the nearest window is held. std::nullopt when the dim is absent.
std::optional<Region> region_at(const SpeechTarget& target, Dim dim, double time_ms);

struct FormantTrack {
  std::vector<double> times_ms;
  std::vector<double> f0, f1, f2, f3;
};

/// Segment length used when a track is not sustained.
inline constexpr double kTrackSegmentMs = 50.0;
/// Coefficient of variation below which a track is treated as sustained.
inline constexpr double kSustainedCv = 0.08;

/// Windows of relative half-width `rel_tolerance` around the track values.
/// Pressure and voicing receive one [0.9, 1.0] window over the duration.
SpeechTarget target_from_formant_track(const FormantTrack& track, double rel_tolerance,
                                       int duration_ms, std::string name = "mimic",
                                       int frame_ms = 5);

/// The shipped targets: i, u, e, ae, happy, example.
const std::vector<SpeechTarget>& builtin_targets();
std::optional<SpeechTarget> find_builtin(std::string_view name);

}  // namespace divakit::targets
