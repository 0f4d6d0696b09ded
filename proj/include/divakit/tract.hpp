#pragma once

// The vocal-tract plant: articulatory state -> area function -> auditory
// (F0-F3) and somatosensory (place, pressure, voicing) state, plus
// time-domain audio through a Kelly-Lochbaum scattering lattice.

#include "divakit/core.hpp"
#include "divakit/signals.hpp"

#include <array>
#include <filesystem>
#include <string_view>
#include <vector>

namespace divakit::tract {

inline constexpr double kShapeLimit = 3.0;
inline constexpr double kOpenArea = 3.0;       // cm^2, area at which place = 0
inline constexpr double kReferenceF0 = 120.0;  // Hz at f0_param = 0
inline constexpr double kSoundSpeed = 35000.0; // cm/s

/// Lower and upper clamp bounds of each motor dimension.
const MotorVector& motor_lower();
const MotorVector& motor_upper();

/// Componentwise clamp into the articulatory ranges. Non-finite entries
/// are rejected.
template <typename Derived>
MotorVector clamp_motor(const Eigen::MatrixBase<Derived>& m) {
  if (!m.allFinite()) throw NumericError("non-finite motor command");
  return m.derived().cwiseMax(motor_lower()).cwiseMin(motor_upper());
}

/// 13-dim articulatory state: 10 shape coordinates in [-3, 3], f0_param in
/// [-1, 1], pressure and voicing in [0, 1]. Always clamped on construction.
class ArticulatoryState {
 public:
  ArticulatoryState() : v_(neutral_vector()) {}
  template <typename Derived>
  explicit ArticulatoryState(const Eigen::MatrixBase<Derived>& v) : v_(clamp_motor(v)) {}

  static ArticulatoryState neutral() { return ArticulatoryState(); }

  const MotorVector& vector() const { return v_; }
  auto shape() const { return v_.head<kShapeDims>(); }
  double f0_param() const { return v_(kF0Index); }
  double pressure() const { return v_(kPressureIndex); }
  double voicing() const { return v_(kVoicingIndex); }

 private:
  static MotorVector neutral_vector();
  MotorVector v_;
};

struct AreaFunction {
  Eigen::VectorXd areas;       // cm^2, glottis to lips
  double section_length = 0.4; // cm

  double length() const { return section_length * static_cast<double>(areas.size()); }
};

struct AuditoryState {
  double f0 = 0, f1 = 0, f2 = 0, f3 = 0;
  AudVector vector() const { return {f0, f1, f2, f3}; }
};

struct SomatState {
  Eigen::Matrix<double, kPlaceRegions, 1> place = Eigen::Matrix<double, kPlaceRegions, 1>::Zero();
  double pressure = 0;
  double voicing = 0;

  SomVector vector() const {
    SomVector s;
    s << place, pressure, voicing;
    return s;
  }
};

struct SensoryState {
  AuditoryState auditory;
  SomatState somato;
};

/// Linear area model A = max(floor, mean + modes * shape).
struct TractBasis {
  Eigen::VectorXd mean_area;
  Eigen::Matrix<double, Eigen::Dynamic, kShapeDims> modes;
  double area_floor = 0.05;
  double section_length = 0.4;

  Eigen::Index sections() const { return mean_area.size(); }
};

/// Parse `section_index, mean_area_cm2, b1..b10` rows (one header line).
TractBasis parse_basis_csv(std::string_view text);
TractBasis load_basis(const std::filesystem::path& path);
/// The shipped basis (a bump-mode model over 44 sections of 0.4 cm).
const TractBasis& default_basis();

/// Areas before flooring; closures show up as values <= 0.
template <typename Derived>
Eigen::VectorXd raw_areas(const Eigen::MatrixBase<Derived>& shape, const TractBasis& basis) {
  return basis.mean_area + basis.modes * shape;
}

AreaFunction area_function(const ArticulatoryState& art, const TractBasis& basis);

struct FrequencyGrid {
  double lo_hz = 100.0;
  double hi_hz = 5000.0;
  double step_hz = 10.0;
};

struct AcousticModel {
  double sound_speed = kSoundSpeed;
  double wall_loss = 0.004;  // attenuation per cm, frequency independent
  FrequencyGrid grid{};
};

class ResonanceError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// |U_lips / U_glottis| for a closed glottis and an ideal open lip end,
/// from the product of per-section chain matrices.
double transfer_magnitude(const AreaFunction& a, double hz, const AcousticModel& model = {});

/// First three resonance peaks of the transfer magnitude: located on the
/// grid, then refined by successive parabolic interpolation on the
/// continuous response. Throws ResonanceError with fewer than 3 peaks.
std::array<double, 3> formants_from_area(const AreaFunction& a, const AcousticModel& model = {});

/// Same resonances, searched only near `guess` (+- `half_width` Hz). Used
/// for finite differences where the peaks move by a fraction of a Hz.
std::array<double, 3> formants_near(const AreaFunction& a, const std::array<double, 3>& guess,
                                    double half_width, const AcousticModel& model = {});

/// Place of articulation per region: clamp01(1 - min raw area / A_open).
Eigen::Matrix<double, kPlaceRegions, 1> place_of_articulation(const Eigen::VectorXd& raw);

SensoryState synth_sample(const ArticulatoryState& art, const TractBasis& basis,
                          const AcousticModel& model = {});

double f0_from_param(double f0_param);
double param_from_f0(double hz);

enum class Space { auditory, somatosensory };

/// Central finite-difference Jacobian of synth_sample (one-sided where a
/// perturbation would leave the clamp range). 4x13 or 8x13.
Eigen::MatrixXd jacobian(const ArticulatoryState& art, Space space, double eps,
                         const TractBasis& basis, const AcousticModel& model = {});

struct AudioConfig {
  double fs = 11025.0;
  double frame_ms = 5.0;
  double glottal_reflection = 0.85;
  double lip_reflection = 0.9;
  double jitter = 0.02;        // relative half-range of per-period f0 jitter
  double noise_level = 0.25;   // aspiration noise amplitude
  double open_quotient = 0.6;
  int oversample = 4;  // lattice rate = oversample * fs; output is the block mean
  bool normalize = true;
};

inline constexpr double kSilencePeak = 1e-6;

/// Time-domain synthesis of a frame-indexed motor trajectory (rows are
/// motor vectors). Peak-normalized to [-1, 1] unless silent or
/// `cfg.normalize` is false.
std::vector<double> synth_audio(const FrameMatrix& trajectory, const TractBasis& basis,
                                signals::Rng& rng, const AudioConfig& cfg = {});

/// Number of lattice tubes for a tract of `length_cm` when a wave crosses
/// one tube per sample at `rate`.
int lattice_sections(double length_cm, double rate);

/// Length-weighted average of `a` onto `n` equal tubes.
Eigen::VectorXd resample_areas(const Eigen::VectorXd& a, int n);

}  // namespace divakit::tract
