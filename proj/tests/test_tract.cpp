#include "doctest.h"
#include "oracles.hpp"

#include "divakit/analysis.hpp"
#include "divakit/tract.hpp"

#include <random>

using namespace divakit;
using tract::ArticulatoryState;

namespace {

const tract::TractBasis& basis() { return tract::default_basis(); }

MotorVector random_motor(std::mt19937_64& gen, double shape_span = 2.0) {
  std::uniform_real_distribution<double> u(-1, 1), p(0, 1);
  MotorVector m;
  for (int c = 0; c < kShapeDims; ++c) m(c) = shape_span * u(gen);
  m(kF0Index) = 0.9 * u(gen);
  m(kPressureIndex) = 0.1 + 0.8 * p(gen);
  m(kVoicingIndex) = 0.1 + 0.8 * p(gen);
  return m;
}

double rms(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace

TEST_CASE("uniform tube resonances follow the quarter-wave law") {
  const auto f = tract::formants_from_area(testing::uniform_tube(44, 3.0));
  const auto q = testing::quarter_wave(17.6);
  // 44 x 0.4 cm; the nominal 17.5 cm law is within 0.6% of this length.
  for (int k = 0; k < 3; ++k) {
    CHECK(f[k] == doctest::Approx(q[k]).epsilon(0.03));
    CHECK(f[k] == doctest::Approx(500.0 * (2 * k + 1)).epsilon(0.03));
  }
}

TEST_CASE("formants are invariant to uniform area scaling") {
  const auto ref = tract::formants_from_area(testing::uniform_tube(44, 3.0));
  const auto shaped = basis().mean_area;
  const auto ref_shaped = tract::formants_from_area({shaped, 0.4});
  for (double s : {0.5, 2.0, 4.0}) {
    const auto f = tract::formants_from_area(testing::uniform_tube(44, 3.0 * s));
    const auto g = tract::formants_from_area({shaped * s, 0.4});
    for (int k = 0; k < 3; ++k) {
      CHECK(f[k] == doctest::Approx(ref[k]).epsilon(0.01));
      CHECK(g[k] == doctest::Approx(ref_shaped[k]).epsilon(0.01));
    }
  }
}

TEST_CASE("halving the tube doubles the formants") {
  const auto full = tract::formants_from_area(testing::uniform_tube(44, 3.0));
  const auto half = tract::formants_from_area(testing::uniform_tube(22, 3.0));
  for (int k = 0; k < 3; ++k) CHECK(half[k] == doctest::Approx(2 * full[k]).epsilon(0.03));
}

TEST_CASE("a tube with too few resonances in band is an error") {
  CHECK_THROWS_AS(tract::formants_from_area(testing::uniform_tube(4, 3.0)), tract::ResonanceError);
}

TEST_CASE("area function: rest, linearity, floor") {
  ArticulatoryState rest;
  CHECK(tract::area_function(rest, basis()).areas == basis().mean_area);

  ShapeVector s = ShapeVector::Constant(0.1);
  s(3) = -0.2;
  const Eigen::VectorXd a1 = tract::raw_areas(s, basis()) - basis().mean_area;
  const Eigen::VectorXd a2 = tract::raw_areas(2 * s, basis()) - basis().mean_area;
  REQUIRE(tract::raw_areas(2 * s, basis()).minCoeff() > basis().area_floor);
  CHECK((a2 - 2 * a1).cwiseAbs().maxCoeff() < 1e-12);

  MotorVector m = MotorVector::Zero();
  m.head<kShapeDims>().setConstant(-3.0);
  const auto closed = tract::area_function(ArticulatoryState(m), basis());
  CHECK(closed.areas.minCoeff() == basis().area_floor);
  CHECK((closed.areas.array() >= basis().area_floor).all());
}

TEST_CASE("area function is Lipschitz in the shape") {
  std::mt19937_64 gen(8);
  for (int i = 0; i < 50; ++i) {
    const MotorVector a = random_motor(gen), b = random_motor(gen);
    const auto fa = tract::area_function(ArticulatoryState(a), basis()).areas;
    const auto fb = tract::area_function(ArticulatoryState(b), basis()).areas;
    const double dshape = (a - b).head<kShapeDims>().norm();
    for (Eigen::Index k = 0; k < fa.size(); ++k) {
      CHECK(std::abs(fa(k) - fb(k)) <= basis().modes.row(k).norm() * dshape + 1e-12);
    }
  }
}

TEST_CASE("clamping keeps states in range and rejects NaN") {
  MotorVector m = MotorVector::Constant(9.0);
  const ArticulatoryState s(m);
  CHECK(s.vector().head<kShapeDims>().maxCoeff() == 3.0);
  CHECK(s.f0_param() == 1.0);
  CHECK(s.pressure() == 1.0);
  m(2) = std::nan("");
  CHECK_THROWS_AS(ArticulatoryState{m}, NumericError);
}

TEST_CASE("neutral synth sample") {
  const auto s = tract::synth_sample(ArticulatoryState::neutral(), basis());
  const auto f = tract::formants_from_area({basis().mean_area, 0.4});
  CHECK(s.auditory.f0 == 120.0);
  CHECK(s.auditory.f1 == f[0]);
  CHECK(s.auditory.f2 == f[1]);
  CHECK(s.auditory.f3 == f[2]);
  CHECK(s.somato.pressure == 1.0);

  MotorVector m = ArticulatoryState::neutral().vector();
  m(kVoicingIndex) = 0.3;
  CHECK(tract::synth_sample(ArticulatoryState(m), basis()).somato.voicing == 0.3);
}

TEST_CASE("a lip constriction is reported in the lip region") {
  std::mt19937_64 gen(21);
  const Eigen::Index n = basis().sections();
  const Eigen::Index lip_start = 5 * n / kPlaceRegions;
  int found = 0;
  for (int i = 0; i < 4000 && found < 5; ++i) {
    const MotorVector m = random_motor(gen, 3.0);
    const Eigen::VectorXd raw = tract::raw_areas(m.head<kShapeDims>(), basis());
    Eigen::Index argmin = 0;
    raw.minCoeff(&argmin);
    if (argmin < lip_start || raw(argmin) >= tract::kOpenArea) continue;
    ++found;
    const auto place = tract::synth_sample(ArticulatoryState(m), basis()).somato.place;
    CHECK(place(5) == place.maxCoeff());
  }
  CHECK(found == 5);
}

TEST_CASE("formants stay ordered or raise a resonance error") {
  std::mt19937_64 gen(1000);
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    try {
      const auto s = tract::synth_sample(ArticulatoryState(random_motor(gen, 3.0)), basis());
      REQUIRE(s.auditory.f1 < s.auditory.f2);
      REQUIRE(s.auditory.f2 < s.auditory.f3);
    } catch (const tract::ResonanceError&) {
      ++failures;
    }
  }
  CHECK(failures < 10);
}

TEST_CASE("jacobian structure and the f0 row") {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 5; ++i) {
    const ArticulatoryState s(random_motor(gen));
    const auto ja = tract::jacobian(s, tract::Space::auditory, 1e-3, basis());
    const auto js = tract::jacobian(s, tract::Space::somatosensory, 1e-3, basis());
    REQUIRE(ja.rows() == 4);
    REQUIRE(js.rows() == 8);
    for (int c = 0; c < kMotorDims; ++c) {
      if (c != kF0Index) CHECK(ja(0, c) == 0.0);
    }
    CHECK(ja(0, kF0Index) == doctest::Approx(testing::f0_derivative(s.f0_param())).epsilon(1e-4));
    CHECK(js.row(6).head<kShapeDims>().isZero(0.0));
    CHECK(js(6, kPressureIndex) == doctest::Approx(1.0));
    CHECK(js(7, kVoicingIndex) == doctest::Approx(1.0));
  }
}

TEST_CASE("jacobian converges at second order and matches directional differences") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 20; ++i) {
    const ArticulatoryState s(random_motor(gen));
    const Eigen::MatrixXd j1 = tract::jacobian(s, tract::Space::auditory, 1e-3, basis());
    const Eigen::MatrixXd j2 = tract::jacobian(s, tract::Space::auditory, 5e-4, basis());
    CHECK((j1 - j2).norm() <= 1e-3 * j1.norm());

    MotorVector dir;
    for (int c = 0; c < kMotorDims; ++c) dir(c) = nd(gen);
    dir(kPressureIndex) = dir(kVoicingIndex) = 0;
    dir.normalize();
    const double h = 1e-3;
    const auto fp = tract::synth_sample(ArticulatoryState(s.vector() + h * dir), basis()).auditory.vector();
    const auto fm = tract::synth_sample(ArticulatoryState(s.vector() - h * dir), basis()).auditory.vector();
    const AudVector directional = (fp - fm) / (2 * h);
    CHECK((directional - j1 * dir).norm() <= 1e-3 * (j1 * dir).norm() + 1e-3);
  }
}

TEST_CASE("lattice tube count follows the sample rate") {
  CHECK(tract::lattice_sections(17.6, 4 * 11025.0) == 22);
  const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(44, 1.0, 4.0);
  const Eigen::VectorXd r = tract::resample_areas(a, 22);
  CHECK(r.size() == 22);
  CHECK(r.mean() == doctest::Approx(a.mean()).epsilon(1e-12));
}

TEST_CASE("audio: silence, determinism, pressure monotonicity") {
  const int frames = 60;
  MotorVector rest = ArticulatoryState::neutral().vector();
  FrameMatrix traj = rest.transpose().replicate(frames, 1);

  tract::AudioConfig raw;
  raw.normalize = false;
  FrameMatrix silent = traj;
  silent.col(kPressureIndex).setZero();
  signals::Rng r0(1);
  const auto quiet = tract::synth_audio(silent, basis(), r0, raw);
  CHECK(std::abs(quiet.size() - 0.3 * 11025.0) <= 55.0);
  double peak = 0;
  for (double v : quiet) peak = std::max(peak, std::abs(v));
  CHECK(peak < 1e-6);

  signals::Rng a(7), b(7);
  CHECK(tract::synth_audio(traj, basis(), a) == tract::synth_audio(traj, basis(), b));

  FrameMatrix half = traj;
  half.col(kPressureIndex).setConstant(0.5);
  signals::Rng d1(3, signals::RngMode::deterministic), d2(3, signals::RngMode::deterministic);
  CHECK(rms(tract::synth_audio(half, basis(), d1, raw)) < rms(tract::synth_audio(traj, basis(), d2, raw)));
}

TEST_CASE("sustained neutral vowel audio peaks match the resonance model") {
  const int frames = 100;  // 500 ms
  FrameMatrix traj = ArticulatoryState::neutral().vector().transpose().replicate(frames, 1);
  signals::Rng rng(1, signals::RngMode::deterministic);
  rng.set_constant("jitter", 0.0);
  rng.set_constant("noise", 0.0);
  const auto wav = tract::synth_audio(traj, basis(), rng);
  const auto expect = tract::formants_from_area({basis().mean_area, 0.4});
  const auto frames_out = analysis::lpc_formants(wav, 11025.0);
  std::vector<double> f1, f2, f3;
  for (const auto& fr : frames_out) {
    f1.push_back(fr.f1);
    f2.push_back(fr.f2);
    f3.push_back(fr.f3);
  }
  CHECK(testing::median(f1) == doctest::Approx(expect[0]).epsilon(0.05));
  CHECK(testing::median(f2) == doctest::Approx(expect[1]).epsilon(0.05));
  CHECK(testing::median(f3) == doctest::Approx(expect[2]).epsilon(0.05));
}
