#pragma once

// The discrete-time production loop: smoothed feedforward plus delayed
// auditory/somatosensory feedback driving the tract, and iterated learning
// of the feedforward program.

#include "divakit/control.hpp"
#include "divakit/targets.hpp"
#include "divakit/tract.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace divakit::engine {

struct EngineConfig {
  double frame_ms = 5.0;
  double fs = 11025.0;
  int aud_delay = 15;  // frames
  int som_delay = 10;  // frames
  control::ControlConfig control{};
  std::uint64_t seed = 1;
  bool deterministic = false;
  bool render_audio = true;

  void validate() const;
  /// Throws ValidationError unless `frame_ms` divides the target duration.
  void validate_for(const targets::SpeechTarget& target) const;
};

/// Canonical `key = value` rendering; the config hash is FNV-1a over it.
std::string config_string(const EngineConfig& cfg);
std::uint64_t config_hash(const EngineConfig& cfg);

using AudMatrix = Eigen::Matrix<double, Eigen::Dynamic, kAudDims, Eigen::RowMajor>;
using SomMatrix = Eigen::Matrix<double, Eigen::Dynamic, kSomDims, Eigen::RowMajor>;

struct Trace {
  std::string target;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  int iteration = 0;

  Eigen::VectorXd t_ms;
  FrameMatrix motor;
  FrameMatrix feedforward;
  FrameMatrix corrective;
  AudMatrix auditory;
  SomMatrix somato;
  AudMatrix aud_error;
  SomMatrix som_error;

  /// Per-frame correction credited to the program: the corrective applied
  /// at the frame plus the corrections later derived from the frame's own
  /// delayed sensory consequences.
  FrameMatrix learning;

  std::vector<double> audio;
  double fs = 0;

  Eigen::Index frames() const { return motor.rows(); }
};

Trace simulate(const targets::SpeechTarget& target, const control::ForwardProgram& program,
               const EngineConfig& cfg, const tract::TractBasis& basis = tract::default_basis());

struct Production {
  std::vector<control::ForwardProgram> programs;  // start, then one per iteration
  std::vector<Trace> traces;                      // one per iteration
};

/// Iteration i simulates with programs[i-1] and appends the learned
/// programs[i]. A missing start program means reset_program(target).
Production produce_and_learn(const targets::SpeechTarget& target, int iterations,
                             const EngineConfig& cfg,
                             std::optional<control::ForwardProgram> start = std::nullopt,
                             const tract::TractBasis& basis = tract::default_basis());

/// Mean Euclidean norm of the per-frame corrective command.
double mean_corrective_norm(const Trace& trace);

/// Fraction of frames whose auditory state is inside every constrained
/// auditory window of `target` at the frame time.
double auditory_inside_fraction(const Trace& trace, const targets::SpeechTarget& target);

/// `t_ms, m1..m13, ff1..ff13, c1..c13, aF0..aF3, s1..s8, eA1..eA4, eS1..eS8`.
void write_trace_csv(const Trace& trace, const std::filesystem::path& path);
Trace read_trace_csv(const std::filesystem::path& path);

/// Metadata sidecar: target, seed, config hash, iteration.
void write_trace_metadata(const Trace& trace, const std::filesystem::path& path);

}  // namespace divakit::engine
