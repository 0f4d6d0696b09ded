#include "divakit/analysis.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

namespace divakit::analysis {

double normalized_rmse(const Eigen::Ref<const Eigen::MatrixXd>& a,
                       const Eigen::Ref<const Eigen::MatrixXd>& b, double range) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError("normalized_rmse: shapes " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + " differ");
  }
  if (!(range > 0)) throw ValidationError("normalized_rmse: range must be > 0");
  if (a.size() == 0) return 0.0;
  const double mse = (a - b).squaredNorm() / static_cast<double>(a.size());
  return 100.0 * std::sqrt(mse) / range;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("max_abs_diff: lengths " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()) + " differ");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace {

Eigen::VectorXd hann(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

Eigen::VectorXd hamming(int n) {
  Eigen::VectorXd w(n);
  if (n == 1) return Eigen::VectorXd::Ones(1);
  for (int i = 0; i < n; ++i) w(i) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  return w;
}

int samples_of(double ms, double fs) { return std::max(1, static_cast<int>(std::lround(ms * fs / 1000.0))); }

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

}  // namespace

Eigen::MatrixXd spectrogram(std::span<const double> wav, int win, int hop) {
  if (!(hop > 0 && win >= hop)) throw ValidationError("spectrogram: need win >= hop > 0");
  if (wav.size() < static_cast<std::size_t>(win)) {
    throw ValidationError("spectrogram: signal of " + std::to_string(wav.size()) +
                          " samples is shorter than the window (" + std::to_string(win) + ")");
  }
  const auto n = static_cast<int>(wav.size());
  const int frames = (n - win) / hop + 1;
  const int bins = win / 2 + 1;
  const Eigen::VectorXd w = hann(win);
  const auto x = as_vector(wav);

  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(win));
  std::vector<std::complex<double>> spec;
  Eigen::MatrixXd out(frames, bins);
  for (int f = 0; f < frames; ++f) {
    Eigen::Map<Eigen::VectorXd>(buf.data(), win) = x.segment(f * hop, win).cwiseProduct(w);
    fft.fwd(spec, buf);
    for (int k = 0; k < bins; ++k) out(f, k) = std::abs(spec[static_cast<std::size_t>(k)]);
  }
  return out;
}

Eigen::VectorXd levinson(const Eigen::VectorXd& r, int order) {
  if (r.size() < order + 1) throw ValidationError("levinson: autocorrelation too short");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(order + 1);
  a(0) = 1.0;
  double err = r(0);
  if (!(err > 0)) throw NumericError("levinson: zero-energy frame");
  for (int i = 1; i <= order; ++i) {
    double acc = r(i);
    for (int j = 1; j < i; ++j) acc += a(j) * r(i - j);
    const double k = -acc / err;
    const Eigen::VectorXd prev = a;
    for (int j = 1; j < i; ++j) a(j) = prev(j) + k * prev(i - j);
    a(i) = k;
    err *= (1.0 - k * k);
    if (!(err > 0)) break;
  }
  return a;
}

std::vector<FormantFrame> lpc_formants(std::span<const double> wav, double fs,
                                       const LpcConfig& cfg) {
  if (cfg.order < 8 || cfg.order > 20) throw ValidationError("lpc_formants: order must lie in [8, 20]");
  if (!(fs > 0)) throw ValidationError("lpc_formants: fs must be positive");
  const int win = samples_of(cfg.window_ms, fs);
  const int hop = samples_of(cfg.hop_ms, fs);
  const auto n = static_cast<int>(wav.size());
  if (n < win) throw NumericError("lpc_formants: no voiced frames (signal shorter than one window)");

  Eigen::VectorXd x(n);
  x(0) = wav[0];
  for (int i = 1; i < n; ++i) x(i) = wav[static_cast<std::size_t>(i)] - cfg.preemphasis * wav[static_cast<std::size_t>(i - 1)];

  const int frames = (n - win) / hop + 1;
  Eigen::VectorXd rms(frames);
  for (int f = 0; f < frames; ++f) rms(f) = std::sqrt(x.segment(f * hop, win).squaredNorm() / win);
  const double loudest = rms.maxCoeff();
  constexpr double kSilence = 1e-7;
  if (!(loudest > kSilence)) throw NumericError("lpc_formants: no voiced frames");

  const Eigen::VectorXd w = hamming(win);
  const int p = cfg.order;
  std::vector<FormantFrame> out;
  bool any_gated = false;
  for (int f = 0; f < frames; ++f) {
    if (rms(f) < cfg.energy_gate * loudest) continue;
    any_gated = true;
    const Eigen::VectorXd seg = x.segment(f * hop, win).cwiseProduct(w);
    Eigen::VectorXd r(p + 1);
    for (int lag = 0; lag <= p; ++lag) r(lag) = seg.head(win - lag).dot(seg.tail(win - lag));
    const Eigen::VectorXd a = levinson(r, p);

    // Roots of z^p + a1 z^(p-1) + ... + ap via the companion matrix.
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    companion.row(0) = -a.tail(p).transpose();
    companion.diagonal(-1).setOnes();
    const Eigen::VectorXcd roots = Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues();

    std::vector<double> freqs;
    for (const auto& z : roots) {
      if (z.imag() <= 0 || std::abs(z) >= 1.0) continue;
      const double freq = std::arg(z) * fs / (2.0 * std::numbers::pi);
      const double bw = -std::log(std::abs(z)) * fs / std::numbers::pi;
      if (freq < cfg.min_frequency || bw >= cfg.max_bandwidth) continue;
      freqs.push_back(freq);
    }
    if (freqs.size() < 3) continue;
    std::sort(freqs.begin(), freqs.end());
    const double centre = (f * hop + 0.5 * win) * 1000.0 / fs;
    out.push_back({centre, freqs[0], freqs[1], freqs[2]});
  }
  if (!any_gated) throw NumericError("lpc_formants: no voiced frames");
  if (out.empty()) throw NumericError("lpc_formants: fewer than 3 qualifying roots in every frame");
  return out;
}

std::vector<PitchFrame> pitch_track(std::span<const double> wav, double fs, const PitchConfig& cfg) {
  if (!(fs > 0)) throw ValidationError("pitch_track: fs must be positive");
  const int win = samples_of(cfg.window_ms, fs);
  const int hop = samples_of(cfg.hop_ms, fs);
  const int lag_lo = std::max(1, static_cast<int>(std::floor(fs / cfg.max_f0)));
  const int lag_hi = static_cast<int>(std::ceil(fs / cfg.min_f0));
  const auto n = static_cast<int>(wav.size());
  std::vector<PitchFrame> out;
  if (n < win + lag_hi + 1) return out;
  const auto x = as_vector(wav);

  const int frames = (n - win - lag_hi - 1) / hop + 1;
  const int span = win + lag_hi + 1;
  std::vector<double> nccf(static_cast<std::size_t>(lag_hi + 2));
  Eigen::VectorXd clipped(span);
  for (int f = 0; f < frames; ++f) {
    // Centre clipping suppresses formant ringing that would otherwise
    // correlate at sub-period lags.
    const auto raw = x.segment(f * hop, span);
    const double level = cfg.centre_clip * raw.cwiseAbs().maxCoeff();
    clipped = raw.unaryExpr([level](double v) {
      return v > level ? v - level : (v < -level ? v + level : 0.0);
    });
    const int s = 0;
    const auto& xs = clipped;
    const auto ref = xs.segment(s, win);
    const double e0 = ref.squaredNorm();
    PitchFrame pf;
    pf.t_ms = (f * hop + 0.5 * win) * 1000.0 / fs;
    if (e0 <= 0) {
      out.push_back(pf);
      continue;
    }
    double best = -1.0;
    for (int lag = lag_lo - 1; lag <= lag_hi + 1; ++lag) {
      const auto shifted = xs.segment(s + lag, win);
      const double e1 = shifted.squaredNorm();
      const double v = e1 > 0 ? ref.dot(shifted) / std::sqrt(e0 * e1) : 0.0;
      nccf[static_cast<std::size_t>(lag)] = v;
      if (lag >= lag_lo && lag <= lag_hi) best = std::max(best, v);
    }
    if (best >= cfg.voicing_threshold) {
      for (int lag = lag_lo; lag <= lag_hi; ++lag) {
        const double c = nccf[static_cast<std::size_t>(lag)];
        const double l = nccf[static_cast<std::size_t>(lag - 1)];
        const double r = nccf[static_cast<std::size_t>(lag + 1)];
        if (c < cfg.octave_tolerance * best || c < l || c < r) continue;
        const double denom = l - 2.0 * c + r;
        const double shift = denom < 0 ? 0.5 * (l - r) / denom : 0.0;
        pf.f0 = fs / (lag + shift);
        break;
      }
    }
    out.push_back(pf);
  }

  // Running median over voiced neighbours removes isolated octave jumps.
  if (cfg.median_span > 1) {
    const auto half = static_cast<std::ptrdiff_t>(cfg.median_span / 2);
    const std::vector<PitchFrame> raw = out;
    std::vector<double> window;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (!raw[i].f0) continue;
      window.clear();
      const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(i) - half);
      const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(raw.size()) - 1,
                                               static_cast<std::ptrdiff_t>(i) + half);
      for (auto j = lo; j <= hi; ++j) {
        if (raw[static_cast<std::size_t>(j)].f0) window.push_back(*raw[static_cast<std::size_t>(j)].f0);
      }
      const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
      std::nth_element(window.begin(), mid, window.end());
      out[i].f0 = *mid;
    }
  }
  return out;
}

double quantize16(double x) {
  const double c = std::clamp(x, -1.0, 1.0);
  return static_cast<double>(static_cast<std::int16_t>(std::lround(c * 32767.0))) / 32767.0;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b.data(), 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

}  // namespace

void write_wav(const std::filesystem::path& path, std::span<const double> samples, double fs) {
  if (!(fs > 0 && fs < 4.0e9)) throw ValidationError("write_wav: invalid sample rate");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const auto rate = static_cast<std::uint32_t>(std::lround(fs));
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (double s : samples) {
    const auto v = static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0, 1.0) * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Wave read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  const auto bad = [&](const std::string& why) {
    return IoError("'" + path.string() + "': malformed WAV header: " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw bad("missing RIFF/WAVE signature");
  }
  std::size_t pos = 12;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) throw bad("truncated fmt chunk");
      const std::uint16_t format = get_u16(bytes.data() + body);
      channels = get_u16(bytes.data() + body + 2);
      rate = get_u32(bytes.data() + body + 4);
      bits = get_u16(bytes.data() + body + 14);
      if (format != 1 || bits != 16) {
        throw IoError("'" + path.string() + "': unsupported encoding (format " +
                      std::to_string(format) + ", " + std::to_string(bits) + " bits); need 16-bit PCM");
      }
      if (channels == 0 || rate == 0) throw bad("zero channels or sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw bad("data chunk before fmt chunk");
      const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
      const std::size_t frames = avail / (2u * channels);
      Wave w;
      w.fs = rate;
      w.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0;
        for (std::uint16_t c = 0; c < channels; ++c) {
          const auto v = static_cast<std::int16_t>(get_u16(bytes.data() + body + 2 * (i * channels + c)));
          acc += v / 32767.0;
        }
        w.samples[i] = acc / channels;
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw bad(have_fmt ? "no data chunk" : "no fmt chunk");
}

targets::FormantTrack extract_track(const Wave& wave, const LpcConfig& lpc, const PitchConfig& pitch) {
  const auto f0 = pitch_track(wave.samples, wave.fs, pitch);
  if (f0.empty()) throw NumericError("unvoiced input: signal too short for pitch analysis");
  if (std::none_of(f0.begin(), f0.end(), [](const PitchFrame& p) { return p.f0.has_value(); })) {
    throw NumericError("unvoiced input: no frame has a pitch");
  }
  std::vector<FormantFrame> formants;
  try {
    formants = lpc_formants(wave.samples, wave.fs, lpc);
  } catch (const NumericError& e) {
    throw NumericError(std::string("unvoiced input: ") + e.what());
  }
  targets::FormantTrack track;
  std::size_t j = 0;
  for (const auto& fr : formants) {
    while (j + 1 < f0.size() && std::abs(f0[j + 1].t_ms - fr.t_ms) <= std::abs(f0[j].t_ms - fr.t_ms)) ++j;
    if (!f0[j].f0) continue;
    track.times_ms.push_back(fr.t_ms);
    track.f0.push_back(*f0[j].f0);
    track.f1.push_back(fr.f1);
    track.f2.push_back(fr.f2);
    track.f3.push_back(fr.f3);
  }
  if (track.times_ms.empty()) throw NumericError("unvoiced input: no frame has both a pitch and formants");
  return track;
}

}  // namespace divakit::analysis
