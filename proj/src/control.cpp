#include "divakit/control.hpp"

#include "builtin_data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace divakit::control {

using targets::Dim;

void ControlConfig::validate() const {
  if (!(g_aud >= 0) || !(g_som >= 0)) throw ValidationError("feedback gains must be >= 0");
  if (!(learn_rate > 0 && learn_rate <= 1)) throw ValidationError("learn_rate must lie in (0, 1]");
  if (!(damping_rel > 0)) throw ValidationError("damping must be > 0");
  if (!(learn_aim >= 0 && learn_aim < 0.5)) throw ValidationError("learn_aim must lie in [0, 0.5)");
  if (!(fd_eps > 0)) throw ValidationError("fd_eps must be > 0");
  if (smoothing_taps.empty()) throw ValidationError("smoothing needs at least one tap");
}

Eigen::VectorXd region_error(const Eigen::Ref<const Eigen::VectorXd>& state,
                             const targets::SpeechTarget& target, std::span<const Dim> dims,
                             double time_ms, double aim) {
  if (state.size() != static_cast<Eigen::Index>(dims.size())) {
    throw ValidationError("region_error: state and dimension list differ in length");
  }
  Eigen::VectorXd err = Eigen::VectorXd::Zero(state.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto region = targets::region_at(target, dims[i], time_ms);
    if (!region) continue;
    const double v = state(static_cast<Eigen::Index>(i));
    const double inset = aim * (region->max - region->min);
    if (v < region->min) {
      err(static_cast<Eigen::Index>(i)) = region->min + inset - v;
    } else if (v > region->max) {
      err(static_cast<Eigen::Index>(i)) = region->max - inset - v;
    }
  }
  return err;
}

ErrorSignal sensory_error(const AudVector& auditory, double aud_time_ms, const SomVector& somato,
                          double som_time_ms, const targets::SpeechTarget& target) {
  ErrorSignal e;
  e.auditory = region_error(auditory, target, targets::kAuditoryDims, aud_time_ms);
  e.somato = region_error(somato, target, targets::kSomatoDims, som_time_ms);
  return e;
}

Correction corrective_parts(const tract::ArticulatoryState& art, const ErrorSignal& err,
                            const ControlConfig& cfg, const tract::TractBasis& basis) {
  Correction c;
  if (!err.auditory.isZero(0.0) && cfg.g_aud > 0) {
    const AudJacobian j = tract::jacobian(art, tract::Space::auditory, cfg.fd_eps, basis);
    c.auditory = cfg.g_aud * damped_pinv(j, cfg.damping_rel) * err.auditory;
  }
  if (!err.somato.isZero(0.0) && cfg.g_som > 0) {
    const SomJacobian j = tract::jacobian(art, tract::Space::somatosensory, cfg.fd_eps, basis);
    c.somato = cfg.g_som * damped_pinv(j, cfg.damping_rel) * err.somato;
  }
  if (!c.auditory.allFinite() || !c.somato.allFinite()) {
    throw NumericError("non-finite corrective command");
  }
  return c;
}

MotorVector feedforward_read(const ForwardProgram& p, double time_ms) {
  if (p.frames.rows() == 0) throw ValidationError("feedforward_read: empty program");
  if (!(time_ms >= 0 && time_ms <= p.duration_ms())) {
    throw ValidationError("feedforward_read: time outside the program");
  }
  const double u = time_ms / p.frame_ms;
  const Eigen::Index last = p.frames.rows() - 1;
  const auto k = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(u)), last);
  if (k == last) return tract::clamp_motor(p.frames.row(last).transpose());
  const double f = u - static_cast<double>(k);
  const MotorVector v = (1.0 - f) * p.frames.row(k).transpose() + f * p.frames.row(k + 1).transpose();
  return tract::clamp_motor(v);
}

ForwardProgram learn_update(const ForwardProgram& p, const FrameMatrix& corrections, double rate) {
  if (corrections.rows() != p.frames.rows()) {
    throw ValidationError("learn_update: correction shape " + std::to_string(corrections.rows()) +
                          "x13 does not match program " + std::to_string(p.frames.rows()) + "x13");
  }
  ForwardProgram out = p;
  for (Eigen::Index r = 0; r < p.frames.rows(); ++r) {
    out.frames.row(r) =
        tract::clamp_motor((p.frames.row(r) + rate * corrections.row(r)).transpose()).transpose();
  }
  return out;
}

ForwardProgram reset_program(const targets::SpeechTarget& target, double frame_ms) {
  if (!(frame_ms > 0)) throw ValidationError("frame period must be positive");
  const auto n = static_cast<Eigen::Index>(std::llround(target.duration_ms / frame_ms));
  ForwardProgram p{target.name, frame_ms, FrameMatrix::Zero(n, kMotorDims)};
  for (Eigen::Index r = 0; r < n; ++r) {
    const double t = static_cast<double>(r) * frame_ms;
    MotorVector m = MotorVector::Zero();
    if (auto f0 = targets::region_at(target, Dim::F0, t)) {
      m(kF0Index) = tract::param_from_f0(0.5 * (f0->min + f0->max));
    }
    const auto p_reg = targets::region_at(target, Dim::pressure, t);
    const auto v_reg = targets::region_at(target, Dim::voicing, t);
    m(kPressureIndex) = p_reg ? 0.5 * (p_reg->min + p_reg->max) : 1.0;
    m(kVoicingIndex) = v_reg ? 0.5 * (v_reg->min + v_reg->max) : 1.0;
    p.frames.row(r) = tract::clamp_motor(m).transpose();
  }
  return p;
}

std::string serialize_program(const ForwardProgram& p) {
  std::string out;
  for (int c = 0; c < kMotorDims; ++c) out += (c ? ",m" : "m") + std::to_string(c + 1);
  out += '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < p.frames.rows(); ++r) {
    for (int c = 0; c < kMotorDims; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", p.frames(r, c));
      if (c) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

ForwardProgram parse_program(std::string_view text, std::string target_name, double frame_ms) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw IoError("program file is empty");
  std::vector<MotorVector> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    MotorVector m;
    for (int c = 0; c < kMotorDims; ++c) {
      std::string cell;
      if (!std::getline(fields, cell, c + 1 < kMotorDims ? ',' : '\n')) {
        throw IoError("program row " + std::to_string(line_no) + " has fewer than 13 values");
      }
      try {
        m(c) = std::stod(cell);
      } catch (const std::exception&) {
        throw IoError("program row " + std::to_string(line_no) + ": bad value '" + cell + "'");
      }
    }
    rows.push_back(m);
  }
  ForwardProgram p{std::move(target_name), frame_ms,
                   FrameMatrix(static_cast<Eigen::Index>(rows.size()), kMotorDims)};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    p.frames.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  }
  return p;
}

void save_program(const ForwardProgram& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << serialize_program(p);
}

ForwardProgram load_program(const std::filesystem::path& path, std::string target_name,
                            double frame_ms) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open program '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_program(ss.str(), std::move(target_name), frame_ms);
}

std::optional<ForwardProgram> pretrained_program(const targets::SpeechTarget& target) {
  for (const auto& file : data::builtin_program_files()) {
    if (file.name == target.name) {
      auto p = parse_program(file.text, target.name, target.frame_ms);
      if (p.frame_count() == target.frame_count()) return p;
    }
  }
  return std::nullopt;
}

}  // namespace divakit::control
