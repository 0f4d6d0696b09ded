#pragma once

// Error maps over target regions, damped-pseudoinverse corrective
// commands, and the adaptive feedforward motor program.

#include "divakit/core.hpp"
#include "divakit/targets.hpp"
#include "divakit/tract.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace divakit::control {

struct ControlConfig {
  double g_aud = 0.8;
  double g_som = 0.5;
  double damping_rel = 1e-2;  // lambda = damping_rel * sigma_max^2
  double learn_rate = 1.0;
  double learn_aim = 0.25;  // learning credit aims this fraction of the window width inside a violated bound
  double fd_eps = 1e-3;
  std::vector<double> smoothing_taps{0.25, 0.5, 0.25};

  /// Throws ValidationError on an out-of-range field.
  void validate() const;
};

struct ErrorSignal {
  AudVector auditory = AudVector::Zero();
  SomVector somato = SomVector::Zero();
};

/// Signed distance from `state` to each dim's region at `time_ms`:
/// min - v below the region, max - v above it, 0 inside or unconstrained.
/// A positive `aim` moves the point aimed at from the violated bound to
/// `aim * width` inside it; states inside still yield 0.
Eigen::VectorXd region_error(const Eigen::Ref<const Eigen::VectorXd>& state,
                             const targets::SpeechTarget& target,
                             std::span<const targets::Dim> dims, double time_ms,
                             double aim = 0.0);

ErrorSignal sensory_error(const AudVector& auditory, double aud_time_ms, const SomVector& somato,
                          double som_time_ms, const targets::SpeechTarget& target);

/// J^T (J J^T + lambda I)^-1 with lambda = damping_rel * sigma_max(J)^2.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::ColsAtCompileTime, Derived::RowsAtCompileTime>
damped_pinv(const Eigen::MatrixBase<Derived>& j, double damping_rel) {
  using Scalar = typename Derived::Scalar;
  using Gram = Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, Derived::RowsAtCompileTime>;
  const Gram gram = j * j.transpose();
  const Scalar sigma_max_sq = Eigen::SelfAdjointEigenSolver<Gram>(gram, Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .maxCoeff();
  using Result = Eigen::Matrix<Scalar, Derived::ColsAtCompileTime, Derived::RowsAtCompileTime>;
  if (!(sigma_max_sq > 0)) return Result::Zero(j.cols(), j.rows());
  const Gram damped = gram + damping_rel * sigma_max_sq * Gram::Identity(j.rows(), j.rows());
  return j.transpose() * damped.ldlt().solve(Gram::Identity(j.rows(), j.rows()));
}

/// Auditory and somatosensory contributions of a corrective command.
struct Correction {
  MotorVector auditory = MotorVector::Zero();
  MotorVector somato = MotorVector::Zero();
  MotorVector total() const { return auditory + somato; }
};

/// g_aud J_a^+ e_aud + g_som J_s^+ e_som with Jacobians taken at `art`.
/// A zero error skips its Jacobian.
Correction corrective_parts(const tract::ArticulatoryState& art, const ErrorSignal& err,
                            const ControlConfig& cfg, const tract::TractBasis& basis);

inline MotorVector corrective_command(const tract::ArticulatoryState& art, const ErrorSignal& err,
                                      const ControlConfig& cfg, const tract::TractBasis& basis) {
  return corrective_parts(art, err, cfg, basis).total();
}

/// Frame-indexed feedforward commands for one target.
struct ForwardProgram {
  std::string target_name;
  double frame_ms = 5.0;
  FrameMatrix frames;

  Eigen::Index frame_count() const { return frames.rows(); }
  double duration_ms() const { return frame_ms * static_cast<double>(frames.rows()); }
};

/// Linear interpolation between frames, held after the last frame,
/// clamped to the articulatory ranges.
MotorVector feedforward_read(const ForwardProgram& p, double time_ms);

/// frames + rate * corrections, clamped.
ForwardProgram learn_update(const ForwardProgram& p, const FrameMatrix& corrections, double rate);

/// Neutral posture with source parameters centred in their windows.
ForwardProgram reset_program(const targets::SpeechTarget& target, double frame_ms);

/// `<name>.prog.csv`: header m1..m13, then one row per frame at 17
/// significant digits.
std::string serialize_program(const ForwardProgram& p);
ForwardProgram parse_program(std::string_view text, std::string target_name, double frame_ms);
void save_program(const ForwardProgram& p, const std::filesystem::path& path);
ForwardProgram load_program(const std::filesystem::path& path, std::string target_name,
                            double frame_ms);

/// Shipped pretrained program for a built-in target, if one exists.
std::optional<ForwardProgram> pretrained_program(const targets::SpeechTarget& target);

}  // namespace divakit::control
