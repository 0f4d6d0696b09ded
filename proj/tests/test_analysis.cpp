#include "doctest.h"
#include "oracles.hpp"

#include "divakit/analysis.hpp"

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace divakit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("divakit_analysis_" + name); }

std::vector<double> rotate(const std::vector<double>& x, std::size_t by) {
  std::vector<double> out(x.begin() + static_cast<std::ptrdiff_t>(by), x.end());
  out.insert(out.end(), x.begin(), x.begin() + static_cast<std::ptrdiff_t>(by));
  return out;
}

std::array<double, 3> median_formants(const std::vector<analysis::FormantFrame>& frames) {
  std::vector<double> f1, f2, f3;
  for (const auto& f : frames) {
    f1.push_back(f.f1);
    f2.push_back(f.f2);
    f3.push_back(f.f3);
  }
  return {testing::median(f1), testing::median(f2), testing::median(f3)};
}

}  // namespace

TEST_CASE("normalized rmse: identity, offset, two-pass oracle, symmetry, scale") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(40, 13);
  CHECK(analysis::normalized_rmse(a, a, 6.0) == 0.0);
  Eigen::MatrixXd b = a.array() + 0.06;
  CHECK(analysis::normalized_rmse(a, b, 6.0) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(1000), y(1000);
  for (int i = 0; i < 1000; ++i) {
    x(i) = nd(gen);
    y(i) = nd(gen);
  }
  double sum = 0;
  for (int i = 0; i < 1000; ++i) sum += (x(i) - y(i)) * (x(i) - y(i));
  const double oracle = 100.0 * std::sqrt(sum / 1000.0) / 2.5;
  CHECK(std::abs(analysis::normalized_rmse(x, y, 2.5) - oracle) < 1e-12);
  CHECK(analysis::normalized_rmse(x, y, 2.5) == analysis::normalized_rmse(y, x, 2.5));
  CHECK(analysis::normalized_rmse(2 * x, 2 * y, 5.0) == doctest::Approx(oracle).epsilon(1e-14));

  CHECK_THROWS_AS(analysis::normalized_rmse(x, y.head(999), 1.0), ValidationError);
  CHECK_THROWS_AS(analysis::normalized_rmse(x, y, 0.0), ValidationError);
}

TEST_CASE("max abs diff") {
  std::vector<double> a = testing::white_noise(500, 3);
  CHECK(analysis::max_abs_diff(a, a) == 0.0);
  auto b = a;
  b[123] += 0.002;
  CHECK(analysis::max_abs_diff(a, b) == doctest::Approx(0.002).epsilon(1e-9));
  b.pop_back();
  CHECK_THROWS_AS(analysis::max_abs_diff(a, b), ValidationError);
}

TEST_CASE("spectrogram: frame count, silence, sine, Parseval") {
  const int win = 256, hop = 64;
  const auto zeros = std::vector<double>(2000, 0.0);
  const auto z = analysis::spectrogram(zeros, win, hop);
  CHECK(z.rows() == (2000 - win) / hop + 1);
  CHECK(z.cols() == win / 2 + 1);
  CHECK(z.isZero(0));

  const double fs = 8192;
  const int bin = 20;
  const auto x = testing::sine(fs, 0.25, analysis::bin_frequency(bin, win, fs));
  const auto s = analysis::spectrogram(x, win, hop);
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    Eigen::Index top = 0;
    s.row(r).maxCoeff(&top);
    CHECK(top == bin);
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      if (std::abs(c - bin) >= 2) CHECK(20 * std::log10(s(r, c) / s(r, bin) + 1e-300) <= -30);
    }
  }

  const auto noise = testing::white_noise(3000, 4);
  const auto n = analysis::spectrogram(noise, win, hop);
  for (Eigen::Index r = 0; r < n.rows(); ++r) {
    double time_energy = 0;
    for (int k = 0; k < win; ++k) {
      const double w = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * k / win);
      const double v = w * noise[static_cast<std::size_t>(r * hop + k)];
      time_energy += v * v;
    }
    // One-sided spectrum: interior bins stand for two conjugate bins.
    double spec = n(r, 0) * n(r, 0) + n(r, win / 2) * n(r, win / 2);
    for (int c = 1; c < win / 2; ++c) spec += 2 * n(r, c) * n(r, c);
    CHECK(std::abs(spec / win - time_energy) <= 1e-6 * time_energy);
  }

  CHECK_THROWS_AS(analysis::spectrogram(std::vector<double>(100, 0.0), 256, 64), ValidationError);
  CHECK_THROWS_AS(analysis::spectrogram(noise, 64, 128), ValidationError);
}

TEST_CASE("levinson solves the normal equations of an AR(2) process") {
  // r(k) of x[n] = 1.2 x[n-1] - 0.5 x[n-2] + w[n], from the Yule-Walker relations.
  const double a1 = 1.2, a2 = -0.5;
  const double rho1 = a1 / (1 - a2);
  const double rho2 = a1 * rho1 + a2;
  Eigen::VectorXd r(3);
  r << 1.0, rho1, rho2;
  const auto a = analysis::levinson(r, 2);
  CHECK(a(0) == 1.0);
  CHECK(a(1) == doctest::Approx(-a1).epsilon(1e-12));
  CHECK(a(2) == doctest::Approx(-a2).epsilon(1e-12));
}

TEST_CASE("lpc recovers a constructed three-resonance signal") {
  const double fs = 11025;
  const std::array<double, 3> f{700, 1200, 2500};
  const auto x = testing::all_pole_vowel(fs, 0.5, 120, f, {60, 80, 120});
  const auto got = median_formants(analysis::lpc_formants(x, fs));
  for (int k = 0; k < 3; ++k) CHECK(got[k] == doctest::Approx(f[k]).epsilon(0.05));
}

TEST_CASE("lpc is stable under sub-hop shifts") {
  const double fs = 11025;
  const auto x = testing::all_pole_vowel(fs, 0.5, 120, {500, 1500, 2500}, {60, 80, 120});
  const auto base = median_formants(analysis::lpc_formants(x, fs));
  for (std::size_t shift : {17u, 55u, 101u}) {
    const auto moved = median_formants(analysis::lpc_formants(rotate(x, shift), fs));
    for (int k = 0; k < 3; ++k) CHECK(moved[k] == doctest::Approx(base[k]).epsilon(0.02));
  }
}

TEST_CASE("lpc on a uniform-tube vowel") {
  const int frames = 100;
  MotorVector m = MotorVector::Zero();
  m(kPressureIndex) = m(kVoicingIndex) = 1;
  tract::TractBasis uniform = tract::default_basis();
  uniform.mean_area.setConstant(3.0);
  uniform.modes.setZero();
  signals::Rng rng(1, signals::RngMode::deterministic);
  rng.set_constant("jitter", 0.0);
  rng.set_constant("noise", 0.0);
  const auto wav = tract::synth_audio(m.transpose().replicate(frames, 1), uniform, rng);
  const auto got = median_formants(analysis::lpc_formants(wav, 11025));
  for (int k = 0; k < 3; ++k) CHECK(got[k] == doctest::Approx(500.0 * (2 * k + 1)).epsilon(0.07));
}

TEST_CASE("lpc rejects silence and bad orders") {
  const std::vector<double> silence(11025, 0.0);
  CHECK_THROWS_AS(analysis::lpc_formants(silence, 11025), NumericError);
  analysis::LpcConfig cfg;
  cfg.order = 4;
  CHECK_THROWS_AS(analysis::lpc_formants(testing::white_noise(11025, 1), 11025, cfg), ValidationError);
}

TEST_CASE("pitch: pulse train, sine octave, noise, silence") {
  const double fs = 11025;
  const auto pulses = analysis::pitch_track(testing::pulse_train(fs, 1.0, 120), fs);
  int voiced = 0;
  for (const auto& p : pulses) {
    if (!p.f0) continue;
    ++voiced;
    CHECK(std::abs(*p.f0 - 120) <= 2);
  }
  CHECK(voiced >= static_cast<int>(pulses.size()) - 2);

  for (const auto& p : analysis::pitch_track(testing::sine(fs, 0.5, 240), fs)) {
    if (p.f0) CHECK(std::abs(*p.f0 - 240) <= 4);
  }

  const auto noise = analysis::pitch_track(testing::white_noise(static_cast<std::size_t>(fs), 99), fs);
  int unvoiced = 0;
  for (const auto& p : noise) unvoiced += !p.f0;
  CHECK(unvoiced >= 0.9 * static_cast<double>(noise.size()));

  for (const auto& p : analysis::pitch_track(std::vector<double>(5000, 0.0), fs)) CHECK_FALSE(p.f0);
  CHECK(analysis::pitch_track(std::vector<double>(10, 0.1), fs).empty());
}

TEST_CASE("wav round-trip keeps quantized samples and the rate") {
  const auto x = testing::white_noise(11025, 5, 0.99);
  const auto path = scratch("roundtrip.wav");
  analysis::write_wav(path, x, 11025);
  const auto w = analysis::read_wav(path);
  CHECK(w.fs == 11025);
  REQUIRE(w.samples.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(w.samples[i] == analysis::quantize16(x[i]));
  fs::remove(path);
}

TEST_CASE("wav reader rejects truncated and foreign files") {
  const auto path = scratch("bad.wav");
  analysis::write_wav(path, std::vector<double>(100, 0.1), 8000);
  fs::resize_file(path, 20);
  CHECK_THROWS_AS(analysis::read_wav(path), IoError);

  {
    std::ofstream out(path, std::ios::binary);
    out << "RIFX0000WAVE";
  }
  CHECK_THROWS_AS(analysis::read_wav(path), IoError);
  CHECK_THROWS_AS(analysis::read_wav(scratch("does_not_exist.wav")), IoError);
  fs::remove(path);
}

TEST_CASE("track extraction pairs pitch with formants and refuses unvoiced input") {
  const double fs = 11025;
  analysis::Wave w{testing::all_pole_vowel(fs, 0.5, 120, {700, 1200, 2500}, {60, 80, 120}), fs};
  const auto track = analysis::extract_track(w);
  REQUIRE(!track.times_ms.empty());
  CHECK(testing::median(track.f0) == doctest::Approx(120).epsilon(0.02));
  CHECK(testing::median(track.f1) == doctest::Approx(700).epsilon(0.05));

  analysis::Wave noise{testing::white_noise(11025, 8), fs};
  CHECK_THROWS_AS(analysis::extract_track(noise), NumericError);
}
