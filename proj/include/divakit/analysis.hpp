#pragma once

// Validation instruments: normalized RMSE, waveform difference,
// spectrograms, LPC formant and autocorrelation pitch extraction, WAV I/O.

#include "divakit/core.hpp"
#include "divakit/targets.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace divakit::analysis {

/// 100 * sqrt(mean((a - b)^2)) / range, over every element.
double normalized_rmse(const Eigen::Ref<const Eigen::MatrixXd>& a,
                       const Eigen::Ref<const Eigen::MatrixXd>& b, double range);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

/// Hann-windowed STFT magnitude. Row r is the frame starting at r * hop;
/// columns are bins 0..win/2. Frame count is floor((N - win) / hop) + 1.
Eigen::MatrixXd spectrogram(std::span<const double> wav, int win, int hop);

/// Centre frequency of spectrogram column `bin`.
inline double bin_frequency(int bin, int win, double fs) { return bin * fs / win; }

struct LpcConfig {
  int order = 12;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  double preemphasis = 0.97;
  double max_bandwidth = 500.0;  // Hz
  double min_frequency = 90.0;   // Hz
  double energy_gate = 0.05;     // frame RMS relative to the loudest frame
};

struct FormantFrame {
  double t_ms = 0;  // frame centre
  double f1 = 0, f2 = 0, f3 = 0;
};

/// Autocorrelation LPC with Levinson-Durbin; formants are the angles of the
/// qualifying polynomial roots. Frames with fewer than three qualifying
/// roots are dropped. Throws NumericError if no frame passes the energy
/// gate, or if no gated frame yields three formants.
std::vector<FormantFrame> lpc_formants(std::span<const double> wav, double fs,
                                       const LpcConfig& cfg = {});

/// Levinson-Durbin on autocorrelation r[0..order]; returns a[0..order], a[0] = 1.
Eigen::VectorXd levinson(const Eigen::VectorXd& r, int order);

struct PitchConfig {
  double window_ms = 30.0;
  double hop_ms = 10.0;
  double min_f0 = 60.0;
  double max_f0 = 400.0;
  double voicing_threshold = 0.3;
  double centre_clip = 0.3;       // fraction of the frame peak removed before correlation
  double octave_tolerance = 0.95;  // shortest lag within this fraction of the best peak wins
  int median_span = 5;             // frames; 1 disables smoothing
};

struct PitchFrame {
  double t_ms = 0;
  std::optional<double> f0;  // absent when unvoiced
};

/// Normalized cross-correlation pitch in the lag band [fs/max_f0, fs/min_f0].
std::vector<PitchFrame> pitch_track(std::span<const double> wav, double fs,
                                    const PitchConfig& cfg = {});

struct Wave {
  std::vector<double> samples;
  double fs = 0;
};

/// Value a sample takes after a 16-bit write and read.
double quantize16(double x);

/// 16-bit PCM mono little-endian RIFF. Samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, std::span<const double> samples, double fs);

/// Reads 16-bit PCM; multi-channel files are averaged to mono.
Wave read_wav(const std::filesystem::path& path);

/// Pairs every LPC frame with the pitch frame nearest in time; frames
/// without a pitch estimate are dropped. Throws NumericError when no
/// frame is voiced.
targets::FormantTrack extract_track(const Wave& wave, const LpcConfig& lpc = {},
                                    const PitchConfig& pitch = {});

}  // namespace divakit::analysis
