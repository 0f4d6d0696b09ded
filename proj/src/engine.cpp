#include "divakit/engine.hpp"

#include "divakit/signals.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace divakit::engine {

using control::ForwardProgram;
using tract::ArticulatoryState;

void EngineConfig::validate() const {
  if (!(frame_ms > 0)) throw ValidationError("frame_ms must be positive");
  if (!(fs >= 8000)) throw ValidationError("fs must be >= 8000 Hz");
  if (aud_delay < 0 || som_delay < 0) throw ValidationError("feedback delays must be >= 0");
  control.validate();
}

void EngineConfig::validate_for(const targets::SpeechTarget& target) const {
  validate();
  const double frames = target.duration_ms / frame_ms;
  if (std::abs(frames - std::round(frames)) > 1e-9) {
    throw ValidationError("frame_ms " + std::to_string(frame_ms) + " does not divide duration " +
                          std::to_string(target.duration_ms) + " of target '" + target.name + "'");
  }
}

std::string config_string(const EngineConfig& cfg) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "frame_ms = " << cfg.frame_ms << '\n'
      << "fs = " << cfg.fs << '\n'
      << "aud_delay = " << cfg.aud_delay << '\n'
      << "som_delay = " << cfg.som_delay << '\n'
      << "g_aud = " << cfg.control.g_aud << '\n'
      << "g_som = " << cfg.control.g_som << '\n'
      << "damping = " << cfg.control.damping_rel << '\n'
      << "learn_rate = " << cfg.control.learn_rate << '\n'
      << "learn_aim = " << cfg.control.learn_aim << '\n'
      << "fd_eps = " << cfg.control.fd_eps << '\n'
      << "smoothing = ";
  for (std::size_t i = 0; i < cfg.control.smoothing_taps.size(); ++i) {
    out << (i ? "," : "") << cfg.control.smoothing_taps[i];
  }
  out << '\n' << "deterministic = " << (cfg.deterministic ? "true" : "false") << '\n';
  return out.str();
}

std::uint64_t config_hash(const EngineConfig& cfg) { return signals::fnv1a64(config_string(cfg)); }

namespace {

double frame_time(Eigen::Index n, double frame_ms) { return static_cast<double>(n) * frame_ms; }

}  // namespace

Trace simulate(const targets::SpeechTarget& target, const ForwardProgram& program,
               const EngineConfig& cfg, const tract::TractBasis& basis) {
  cfg.validate_for(target);
  const auto n_frames = static_cast<Eigen::Index>(std::llround(target.duration_ms / cfg.frame_ms));
  if (program.frame_count() != n_frames) {
    throw ValidationError("program for '" + program.target_name + "' has " +
                          std::to_string(program.frame_count()) + " frames, target '" +
                          target.name + "' needs " + std::to_string(n_frames));
  }

  Trace tr;
  tr.target = target.name;
  tr.seed = cfg.seed;
  tr.config_hash = config_hash(cfg);
  tr.fs = cfg.fs;
  tr.t_ms.resize(n_frames);
  tr.motor.resize(n_frames, kMotorDims);
  tr.feedforward.resize(n_frames, kMotorDims);
  tr.corrective.resize(n_frames, kMotorDims);
  tr.auditory.resize(n_frames, kAudDims);
  tr.somato.resize(n_frames, kSomDims);
  tr.aud_error.resize(n_frames, kAudDims);
  tr.som_error.resize(n_frames, kSomDims);

  const auto& ccfg = cfg.control;
  const Eigen::Index last = n_frames - 1;

  // Symmetric taps are applied with a look-ahead equal to their group delay,
  // so the smoothing adds no lag to the stored program.
  signals::FirFilter<MotorVector> smoother(ccfg.smoothing_taps, MotorVector::Zero());
  const auto lookahead = static_cast<Eigen::Index>(smoother.group_delay());
  smoother.reset(program.frames.row(0).transpose());
  const auto next_feedforward = [&](Eigen::Index n) {
    const Eigen::Index src = std::min(n + lookahead, last);
    return tract::clamp_motor(smoother.apply(program.frames.row(src).transpose()));
  };

  MotorVector ff = next_feedforward(0);
  const tract::SensoryState predicted = tract::synth_sample(ArticulatoryState(ff), basis);
  signals::DelayLine<AudVector> aud_line(static_cast<std::size_t>(cfg.aud_delay), predicted.auditory.vector());
  signals::DelayLine<SomVector> som_line(static_cast<std::size_t>(cfg.som_delay), predicted.somato.vector());

  ArticulatoryState previous(ff);

  for (Eigen::Index n = 0; n < n_frames; ++n) {
    if (n > 0) ff = next_feedforward(n);
    const double t = frame_time(n, cfg.frame_ms);

    AudVector aud_in;
    SomVector som_in;
    if (cfg.aud_delay == 0 || cfg.som_delay == 0) {
      // Zero latency: feed back the prediction of the current feedforward.
      const auto now = tract::synth_sample(ArticulatoryState(ff), basis);
      aud_in = now.auditory.vector();
      som_in = now.somato.vector();
    }
    if (cfg.aud_delay > 0) aud_in = aud_line.peek();
    if (cfg.som_delay > 0) som_in = som_line.peek();

    const double t_aud = std::max(0.0, t - cfg.aud_delay * cfg.frame_ms);
    const double t_som = std::max(0.0, t - cfg.som_delay * cfg.frame_ms);
    const control::ErrorSignal err = control::sensory_error(aud_in, t_aud, som_in, t_som, target);
    const control::Correction corr = control::corrective_parts(previous, err, ccfg, basis);

    const ArticulatoryState motor(ff + corr.total());
    const tract::SensoryState sensed = tract::synth_sample(motor, basis);
    if (cfg.aud_delay > 0) aud_line.push(sensed.auditory.vector());
    if (cfg.som_delay > 0) som_line.push(sensed.somato.vector());

    tr.t_ms(n) = t;
    tr.feedforward.row(n) = ff.transpose();
    tr.corrective.row(n) = corr.total().transpose();
    tr.motor.row(n) = motor.vector().transpose();
    tr.auditory.row(n) = sensed.auditory.vector().transpose();
    tr.somato.row(n) = sensed.somato.vector().transpose();
    tr.aud_error.row(n) = err.auditory.transpose();
    tr.som_error.row(n) = err.somato.transpose();
    previous = motor;
  }

  // Credit each frame with the applied corrective plus the correction its
  // own sensory state calls for, evaluated at the motor state the loop
  // held when that state arrived (frame k + delay - 1).
  tr.learning = tr.corrective;
  for (Eigen::Index k = 0; k < n_frames; ++k) {
    const double t = frame_time(k, cfg.frame_ms);
    control::ErrorSignal e;
    e.auditory = control::region_error(tr.auditory.row(k).transpose(), target, targets::kAuditoryDims,
                                       t, ccfg.learn_aim);
    e.somato = control::region_error(tr.somato.row(k).transpose(), target, targets::kSomatoDims, t,
                                     ccfg.learn_aim);
    if (e.auditory.isZero(0.0) && e.somato.isZero(0.0)) continue;
    const auto state_at = [&](int delay) {
      return ArticulatoryState(tr.motor.row(std::clamp<Eigen::Index>(k + delay - 1, k, last)).transpose());
    };
    control::ErrorSignal aud_only, som_only;
    aud_only.auditory = e.auditory;
    som_only.somato = e.somato;
    const MotorVector c = control::corrective_parts(state_at(cfg.aud_delay), aud_only, ccfg, basis).auditory +
                          control::corrective_parts(state_at(cfg.som_delay), som_only, ccfg, basis).somato;
    tr.learning.row(k) += c.transpose();
  }

  if (cfg.render_audio) {
    signals::Rng rng(cfg.seed, cfg.deterministic ? signals::RngMode::deterministic
                                                 : signals::RngMode::stochastic);
    rng.set_constant("jitter", 0.0);
    rng.set_constant("noise", 0.0);
    tract::AudioConfig audio;
    audio.fs = cfg.fs;
    audio.frame_ms = cfg.frame_ms;
    tr.audio = tract::synth_audio(tr.motor, basis, rng, audio);
  }
  return tr;
}

Production produce_and_learn(const targets::SpeechTarget& target, int iterations,
                             const EngineConfig& cfg, std::optional<ForwardProgram> start,
                             const tract::TractBasis& basis) {
  if (iterations < 0) throw ValidationError("iterations must be >= 0");
  cfg.validate_for(target);
  Production out;
  out.programs.push_back(start ? std::move(*start) : control::reset_program(target, cfg.frame_ms));
  for (int i = 1; i <= iterations; ++i) {
    Trace tr = simulate(target, out.programs.back(), cfg, basis);
    tr.iteration = i;
    out.programs.push_back(control::learn_update(out.programs.back(), tr.learning, cfg.control.learn_rate));
    out.traces.push_back(std::move(tr));
  }
  return out;
}

double mean_corrective_norm(const Trace& trace) {
  if (trace.frames() == 0) return 0.0;
  return trace.corrective.rowwise().norm().mean();
}

double auditory_inside_fraction(const Trace& trace, const targets::SpeechTarget& target) {
  if (trace.frames() == 0) return 0.0;
  Eigen::Index inside = 0;
  for (Eigen::Index n = 0; n < trace.frames(); ++n) {
    const auto e = control::region_error(trace.auditory.row(n).transpose(), target,
                                         targets::kAuditoryDims, trace.t_ms(n));
    if (e.isZero(0.0)) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(trace.frames());
}

// ---------------------------------------------------------------------------
// Export

namespace {

void header_block(std::ostream& out, const char* prefix, int count, int first = 1) {
  for (int i = 0; i < count; ++i) out << ',' << prefix << (i + first);
}

template <typename Row>
void row_block(std::ostream& out, const Row& row) {
  char buf[40];
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", row(i));
    out << ',' << buf;
  }
}

}  // namespace

void write_trace_csv(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "t_ms";
  header_block(out, "m", kMotorDims);
  header_block(out, "ff", kMotorDims);
  header_block(out, "c", kMotorDims);
  out << ",aF0,aF1,aF2,aF3";
  header_block(out, "s", kSomDims);
  header_block(out, "eA", kAudDims);
  header_block(out, "eS", kSomDims);
  out << '\n';
  char buf[40];
  for (Eigen::Index n = 0; n < trace.frames(); ++n) {
    std::snprintf(buf, sizeof buf, "%.17g", trace.t_ms(n));
    out << buf;
    row_block(out, trace.motor.row(n));
    row_block(out, trace.feedforward.row(n));
    row_block(out, trace.corrective.row(n));
    row_block(out, trace.auditory.row(n));
    row_block(out, trace.somato.row(n));
    row_block(out, trace.aud_error.row(n));
    row_block(out, trace.som_error.row(n));
    out << '\n';
  }
}

Trace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("t_ms,", 0) != 0) {
    throw IoError("'" + path.string() + "' is not a trace file");
  }
  constexpr int kColumns = 1 + 3 * kMotorDims + 2 * kAudDims + 2 * kSomDims;
  std::vector<std::array<double, kColumns>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::array<double, kColumns> row{};
    std::istringstream fields(line);
    std::string cell;
    int c = 0;
    while (std::getline(fields, cell, ',')) {
      if (c >= kColumns) throw IoError("trace row has too many columns");
      try {
        row[static_cast<std::size_t>(c++)] = std::stod(cell);
      } catch (const std::exception&) {
        throw IoError("trace has a bad value '" + cell + "'");
      }
    }
    if (c != kColumns) throw IoError("trace row has " + std::to_string(c) + " columns, expected " + std::to_string(kColumns));
    rows.push_back(row);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Trace tr;
  tr.t_ms.resize(n);
  tr.motor.resize(n, kMotorDims);
  tr.feedforward.resize(n, kMotorDims);
  tr.corrective.resize(n, kMotorDims);
  tr.auditory.resize(n, kAudDims);
  tr.somato.resize(n, kSomDims);
  tr.aud_error.resize(n, kAudDims);
  tr.som_error.resize(n, kSomDims);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    std::size_t c = 0;
    tr.t_ms(r) = row[c++];
    for (int i = 0; i < kMotorDims; ++i) tr.motor(r, i) = row[c++];
    for (int i = 0; i < kMotorDims; ++i) tr.feedforward(r, i) = row[c++];
    for (int i = 0; i < kMotorDims; ++i) tr.corrective(r, i) = row[c++];
    for (int i = 0; i < kAudDims; ++i) tr.auditory(r, i) = row[c++];
    for (int i = 0; i < kSomDims; ++i) tr.somato(r, i) = row[c++];
    for (int i = 0; i < kAudDims; ++i) tr.aud_error(r, i) = row[c++];
    for (int i = 0; i < kSomDims; ++i) tr.som_error(r, i) = row[c++];
  }
  tr.learning = FrameMatrix::Zero(n, kMotorDims);
  return tr;
}

void write_trace_metadata(const Trace& trace, const std::filesystem::path& path) {
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << trace.config_hash;
  const nlohmann::ordered_json meta = {
      {"target", trace.target},
      {"seed", trace.seed},
      {"config_hash", hash.str()},
      {"iteration", trace.iteration},
      {"frames", trace.frames()},
      {"fs", trace.fs},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << meta.dump(2) << '\n';
}

}  // namespace divakit::engine
