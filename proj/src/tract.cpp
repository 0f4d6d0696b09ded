#include "divakit/tract.hpp"

#include "builtin_data.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>

namespace divakit::tract {

namespace {

using cd = std::complex<double>;

MotorVector make_bound(double shape, double f0, double unit) {
  MotorVector b;
  b.head<kShapeDims>().setConstant(shape);
  b(kF0Index) = f0;
  b(kPressureIndex) = unit;
  b(kVoicingIndex) = unit;
  return b;
}

}  // namespace

const MotorVector& motor_lower() {
  static const MotorVector lo = make_bound(-kShapeLimit, -1.0, 0.0);
  return lo;
}

const MotorVector& motor_upper() {
  static const MotorVector hi = make_bound(kShapeLimit, 1.0, 1.0);
  return hi;
}

MotorVector ArticulatoryState::neutral_vector() {
  MotorVector v = MotorVector::Zero();
  v(kPressureIndex) = 1.0;
  v(kVoicingIndex) = 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// Basis

TractBasis parse_basis_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw IoError("tract basis: empty file");
  std::vector<std::array<double, kShapeDims + 1>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double index = 0;
    std::array<double, kShapeDims + 1> row{};
    if (!(fields >> index)) throw IoError("tract basis: bad row at line " + std::to_string(line_no));
    for (double& v : row) {
      if (!(fields >> v)) throw IoError("tract basis: expected 12 columns at line " + std::to_string(line_no));
    }
    if (static_cast<int>(index) != static_cast<int>(rows.size())) {
      throw IoError("tract basis: section indices must run 0..S-1 (line " + std::to_string(line_no) + ")");
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw IoError("tract basis: no sections");

  TractBasis basis;
  const auto s = static_cast<Eigen::Index>(rows.size());
  basis.mean_area.resize(s);
  basis.modes.resize(s, kShapeDims);
  for (Eigen::Index i = 0; i < s; ++i) {
    basis.mean_area(i) = rows[i][0];
    for (int j = 0; j < kShapeDims; ++j) basis.modes(i, j) = rows[i][j + 1];
  }
  if ((basis.mean_area.array() <= basis.area_floor).any()) {
    throw ValidationError("tract basis: mean area must exceed the area floor everywhere");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis.modes);
  if (qr.rank() < kShapeDims) throw ValidationError("tract basis: modes are not full column rank");
  return basis;
}

TractBasis load_basis(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tract basis '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_basis_csv(ss.str());
}

const TractBasis& default_basis() {
  static const TractBasis basis = parse_basis_csv(data::default_basis_csv());
  return basis;
}

AreaFunction area_function(const ArticulatoryState& art, const TractBasis& basis) {
  AreaFunction a;
  a.areas = raw_areas(art.shape(), basis).cwiseMax(basis.area_floor);
  a.section_length = basis.section_length;
  return a;
}

// ---------------------------------------------------------------------------
// Acoustics

namespace {

/// U_glottis for unit lip volume velocity and its derivative in Hz.
struct GlottalResponse {
  cd u;
  cd du;
};

GlottalResponse glottal_response(const AreaFunction& a, double hz, const AcousticModel& model) {
  const double w = 2.0 * std::numbers::pi * hz;
  const double l = a.section_length;
  const cd gamma(model.wall_loss, w / model.sound_speed);
  const cd dgamma(0.0, 2.0 * std::numbers::pi / model.sound_speed);
  const cd ch = std::cosh(gamma * l);
  const cd sh = std::sinh(gamma * l);
  const cd dch = sh * dgamma * l;
  const cd dsh = ch * dgamma * l;

  // [P; U] at the lips is [0; 1]; walk the chain back to the glottis.
  cd p(0.0), u(1.0), dp(0.0), du(0.0);
  for (Eigen::Index i = a.areas.size() - 1; i >= 0; --i) {
    const double area = a.areas(i);
    const cd np = ch * p + sh / area * u;
    const cd nu = area * sh * p + ch * u;
    const cd ndp = dch * p + ch * dp + (dsh * u + sh * du) / area;
    const cd ndu = area * (dsh * p + sh * dp) + dch * u + ch * du;
    p = np;
    u = nu;
    dp = ndp;
    du = ndu;
  }
  return {u, du};
}

// d|U_g|^2 / df; zero at a resonance peak.
double slope(const AreaFunction& a, double hz, const AcousticModel& model) {
  const auto r = glottal_response(a, hz, model);
  return 2.0 * (std::conj(r.u) * r.du).real();
}

double glottal_energy(const AreaFunction& a, double hz, const AcousticModel& model) {
  return std::norm(glottal_response(a, hz, model).u);
}

/// Root of the slope inside [lo, hi] where slope(lo) < 0 < slope(hi)
/// (Illinois false position).
double refine_peak(const AreaFunction& a, double lo, double hi, double slo, double shi,
                   const AcousticModel& model) {
  int side = 0;
  for (int it = 0; it < 100 && hi - lo > 1e-10 * hi; ++it) {
    const double x = (lo * shi - hi * slo) / (shi - slo);
    const double sx = slope(a, x, model);
    if (sx == 0.0) return x;
    if (sx < 0) {
      lo = x;
      slo = sx;
      if (side == -1) shi *= 0.5;
      side = -1;
    } else {
      hi = x;
      shi = sx;
      if (side == 1) slo *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (lo + hi);
}

/// Parabolic vertex through three equally spaced samples of |U_g|^2.
double parabolic_vertex(double x1, double h, double y0, double y1, double y2) {
  const double denom = y0 - 2.0 * y1 + y2;
  if (denom <= 0) return x1;
  return x1 + 0.5 * h * (y0 - y2) / denom;
}

double peak_between(const AreaFunction& a, double lo, double hi, const AcousticModel& model) {
  const double slo = slope(a, lo, model);
  const double shi = slope(a, hi, model);
  if (slo < 0 && shi > 0) return refine_peak(a, lo, hi, slo, shi, model);
  const double mid = 0.5 * (lo + hi);
  return parabolic_vertex(mid, 0.5 * (hi - lo), glottal_energy(a, lo, model),
                          glottal_energy(a, mid, model), glottal_energy(a, hi, model));
}

}  // namespace

double transfer_magnitude(const AreaFunction& a, double hz, const AcousticModel& model) {
  return 1.0 / std::abs(glottal_response(a, hz, model).u);
}

std::array<double, 3> formants_from_area(const AreaFunction& a, const AcousticModel& model) {
  const auto& g = model.grid;
  const int n = static_cast<int>(std::floor((g.hi_hz - g.lo_hz) / g.step_hz)) + 1;
  if (n < 3) throw ValidationError("frequency grid needs at least 3 points");
  // Peaks of |H| are minima of |U_g|^2.
  std::vector<double> e(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    e[static_cast<std::size_t>(i)] = glottal_energy(a, g.lo_hz + i * g.step_hz, model);
    if (!std::isfinite(e[static_cast<std::size_t>(i)])) throw ResonanceError("non-finite tract response");
  }
  std::array<double, 3> out{};
  int found = 0;
  for (int i = 1; i + 1 < n && found < 3; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (e[k] < e[k - 1] && e[k] <= e[k + 1]) {
      const double f = g.lo_hz + i * g.step_hz;
      out[static_cast<std::size_t>(found++)] = peak_between(a, f - g.step_hz, f + g.step_hz, model);
    }
  }
  if (found < 3) {
    throw ResonanceError("found " + std::to_string(found) + " resonances in [" +
                         std::to_string(g.lo_hz) + ", " + std::to_string(g.hi_hz) + "] Hz, need 3");
  }
  return out;
}

std::array<double, 3> formants_near(const AreaFunction& a, const std::array<double, 3>& guess,
                                    double half_width, const AcousticModel& model) {
  std::array<double, 3> out{};
  for (std::size_t k = 0; k < 3; ++k) {
    const double lo = guess[k] - half_width;
    const double hi = guess[k] + half_width;
    const double slo = slope(a, lo, model);
    const double shi = slope(a, hi, model);
    if (!(slo < 0 && shi > 0)) return formants_from_area(a, model);
    out[k] = refine_peak(a, lo, hi, slo, shi, model);
  }
  return out;
}

Eigen::Matrix<double, kPlaceRegions, 1> place_of_articulation(const Eigen::VectorXd& raw) {
  Eigen::Matrix<double, kPlaceRegions, 1> place;
  const Eigen::Index s = raw.size();
  for (int k = 0; k < kPlaceRegions; ++k) {
    const Eigen::Index b = k * s / kPlaceRegions;
    const Eigen::Index e = (k + 1) * s / kPlaceRegions;
    const double amin = raw.segment(b, e - b).minCoeff();
    place(k) = std::clamp(1.0 - amin / kOpenArea, 0.0, 1.0);
  }
  return place;
}

double f0_from_param(double f0_param) { return kReferenceF0 * std::exp2(f0_param); }
double param_from_f0(double hz) { return std::log2(hz / kReferenceF0); }

namespace {

SensoryState sense(const ArticulatoryState& art, const TractBasis& basis,
                   const std::array<double, 3>& formants) {
  SensoryState s;
  s.auditory = {f0_from_param(art.f0_param()), formants[0], formants[1], formants[2]};
  s.somato.place = place_of_articulation(raw_areas(art.shape(), basis));
  s.somato.pressure = art.pressure();
  s.somato.voicing = art.voicing();
  return s;
}

}  // namespace

SensoryState synth_sample(const ArticulatoryState& art, const TractBasis& basis,
                          const AcousticModel& model) {
  return sense(art, basis, formants_from_area(area_function(art, basis), model));
}

Eigen::MatrixXd jacobian(const ArticulatoryState& art, Space space, double eps,
                         const TractBasis& basis, const AcousticModel& model) {
  if (!(eps > 0)) throw ValidationError("jacobian step must be positive");
  const bool aud = space == Space::auditory;
  const std::array<double, 3> base = aud ? formants_from_area(area_function(art, basis), model)
                                         : std::array<double, 3>{};
  const auto eval = [&](const MotorVector& v) -> Eigen::VectorXd {
    const ArticulatoryState s(v);
    if (aud) {
      // Shape-independent columns leave the formants untouched.
      const bool moves_shape = (s.shape().array() != art.shape().array()).any();
      const auto f = moves_shape ? formants_near(area_function(s, basis), base, 25.0, model) : base;
      return sense(s, basis, f).auditory.vector();
    }
    return sense(s, basis, base).somato.vector();
  };

  const MotorVector& x = art.vector();
  Eigen::MatrixXd j(aud ? kAudDims : kSomDims, kMotorDims);
  Eigen::VectorXd f_center;
  for (int c = 0; c < kMotorDims; ++c) {
    MotorVector up = x, down = x;
    const bool can_up = x(c) + eps <= motor_upper()(c);
    const bool can_down = x(c) - eps >= motor_lower()(c);
    if (can_up && can_down) {
      up(c) += eps;
      down(c) -= eps;
      j.col(c) = (eval(up) - eval(down)) / (2.0 * eps);
    } else {
      if (f_center.size() == 0) f_center = eval(x);
      if (can_up) {
        up(c) += eps;
        j.col(c) = (eval(up) - f_center) / eps;
      } else {
        down(c) -= eps;
        j.col(c) = (f_center - eval(down)) / eps;
      }
    }
  }
  if (!j.allFinite()) throw NumericError("non-finite Jacobian");
  return j;
}

// ---------------------------------------------------------------------------
// Audio

int lattice_sections(double length_cm, double rate) {
  return std::max(2, static_cast<int>(std::lround(length_cm * rate / kSoundSpeed)));
}

Eigen::VectorXd resample_areas(const Eigen::VectorXd& a, int n) {
  const Eigen::Index s = a.size();
  Eigen::VectorXd out(n);
  const double width = static_cast<double>(s) / n;  // in source sections
  for (int k = 0; k < n; ++k) {
    const double x0 = k * width;
    const double x1 = (k + 1) * width;
    double acc = 0;
    for (auto i = static_cast<Eigen::Index>(std::floor(x0)); i < s && i < x1; ++i) {
      const double lo = std::max<double>(x0, i);
      const double hi = std::min<double>(x1, i + 1);
      if (hi > lo) acc += a(i) * (hi - lo);
    }
    out(k) = acc / width;
  }
  return out;
}

namespace {

/// Derivative of the Rosenberg glottal flow over one period, phase in
/// [0, 1), scaled so the closing peak is -1. Using the derivative folds lip
/// radiation into the source.
double glottal_pulse(double phase, double open_quotient) {
  const double rise = 0.65 * open_quotient;
  const double fall = open_quotient - rise;
  if (phase < rise) return (fall / rise) * std::sin(std::numbers::pi * phase / rise);
  if (phase < open_quotient) return -std::sin(0.5 * std::numbers::pi * (phase - rise) / fall);
  return 0.0;
}

}  // namespace

std::vector<double> synth_audio(const FrameMatrix& trajectory, const TractBasis& basis,
                                signals::Rng& rng, const AudioConfig& cfg) {
  if (trajectory.rows() == 0) throw ValidationError("synth_audio: empty trajectory");
  if (cfg.fs < 8000) throw ValidationError("synth_audio: fs must be >= 8000 Hz");

  const Eigen::Index frames = trajectory.rows();
  if (cfg.oversample < 1) throw ValidationError("synth_audio: oversample must be >= 1");
  const auto over = static_cast<std::size_t>(cfg.oversample);
  const double internal_fs = static_cast<double>(over) * cfg.fs;
  const int tubes = lattice_sections(basis.section_length * static_cast<double>(basis.sections()), internal_fs);

  // Reflection coefficients per frame at each interior junction,
  // r = (A[k+1] - A[k]) / (A[k+1] + A[k]) for volume-velocity waves.
  Eigen::MatrixXd refl(frames, tubes - 1);
  for (Eigen::Index f = 0; f < frames; ++f) {
    const ArticulatoryState art(trajectory.row(f).transpose());
    const Eigen::VectorXd a = resample_areas(area_function(art, basis).areas, tubes);
    for (int k = 0; k + 1 < tubes; ++k) refl(f, k) = (a(k + 1) - a(k)) / (a(k + 1) + a(k));
  }

  const auto total = static_cast<std::size_t>(
      std::lround(static_cast<double>(frames) * cfg.frame_ms * cfg.fs / 1000.0));
  std::vector<double> out(total, 0.0);

  Eigen::VectorXd fwd = Eigen::VectorXd::Zero(tubes);  // arriving at right end of tube k
  Eigen::VectorXd bwd = Eigen::VectorXd::Zero(tubes);  // arriving at left end of tube k
  Eigen::VectorXd nf(tubes), nb(tubes), r(tubes - 1);
  double phase = 0.0;
  double jitter = rng.uniform("jitter", -cfg.jitter, cfg.jitter);
  const double rg = cfg.glottal_reflection;
  const double rl = cfg.lip_reflection;

  for (std::size_t n = 0; n < over * total; ++n) {
    // Frame position of this internal sample, interpolated between frames.
    const double u = (static_cast<double>(n) / internal_fs) * 1000.0 / cfg.frame_ms;
    const auto f0i = std::min<Eigen::Index>(static_cast<Eigen::Index>(u), frames - 1);
    const auto f1i = std::min<Eigen::Index>(f0i + 1, frames - 1);
    const double frac = std::clamp(u - static_cast<double>(f0i), 0.0, 1.0);
    const auto param = [&](int c) {
      return (1.0 - frac) * trajectory(f0i, c) + frac * trajectory(f1i, c);
    };
    r = (1.0 - frac) * refl.row(f0i).transpose() + frac * refl.row(f1i).transpose();

    const double f0 = f0_from_param(std::clamp(param(kF0Index), -1.0, 1.0)) * (1.0 + jitter);
    phase += f0 / internal_fs;
    if (phase >= 1.0) {
      phase -= std::floor(phase);
      jitter = rng.uniform("jitter", -cfg.jitter, cfg.jitter);
    }
    const double pressure = std::clamp(param(kPressureIndex), 0.0, 1.0);
    const double voicing = std::clamp(param(kVoicingIndex), 0.0, 1.0);
    const double noise = rng.uniform("noise", -1.0, 1.0);
    const double source =
        pressure * (voicing * glottal_pulse(phase, cfg.open_quotient) + (1.0 - voicing) * cfg.noise_level * noise);

    // Scattering at the glottis, interior junctions and lips.
    nf(0) = 0.5 * (1.0 + rg) * source + rg * bwd(0);
    for (int k = 0; k + 1 < tubes; ++k) {
      nf(k + 1) = (1.0 + r(k)) * fwd(k) + r(k) * bwd(k + 1);
      nb(k) = -r(k) * fwd(k) + (1.0 - r(k)) * bwd(k + 1);
    }
    const double lip = (1.0 + rl) * fwd(tubes - 1);
    nb(tubes - 1) = -rl * fwd(tubes - 1);
    fwd.swap(nf);
    bwd.swap(nb);

    out[n / over] += lip / static_cast<double>(over);
  }

  if (cfg.normalize) {
    double peak = 0;
    for (double v : out) peak = std::max(peak, std::abs(v));
    if (peak >= kSilencePeak) {
      for (double& v : out) v /= peak;
    }
  }
  return out;
}

}  // namespace divakit::tract
