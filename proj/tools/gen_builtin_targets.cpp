// Regenerates data/targets/*.target from hand-chosen articulations.
//
// For each vowel the tract is evaluated at the articulation and at 200
// seeded perturbations of its shape (sd 0.1 per dim); each F1-F3 window is
// the sampled [min, max], widened to at least +-4% of the centre value.
// Every window therefore contains an articulation of the shipped model.
//
//   gen_builtin_targets <out_dir>

#include "divakit/targets.hpp"
#include "divakit/tract.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

using namespace divakit;
using targets::Dim;

namespace {

struct Articulation {
  const char* name;
  std::array<double, kShapeDims> shape;
};

// Found by hill-climbing the shipped basis toward textbook formant values.
constexpr Articulation kVowels[] = {
    {"i", {-1.23, -0.05, 0.87, 0.48, -0.28, -1.48, -1.82, -1.97, -0.99, 0.66}},
    {"u", {0.47, -0.15, -2.19, -1.39, -0.20, 0.17, 0.01, 0.34, -0.80, -2.63}},
    {"e", {-0.97, -0.22, 0.58, 0.64, 0.26, -0.60, -1.15, -1.14, -0.08, 0.59}},
    {"ae", {-2.08, -1.39, -1.00, -0.63, -0.28, -0.08, -0.01, 0.16, 0.66, 0.75}},
};

constexpr double kMinHalfWidth = 0.04;

MotorVector motor_of(const std::array<double, kShapeDims>& shape) {
  MotorVector m = tract::ArticulatoryState::neutral().vector();
  for (int i = 0; i < kShapeDims; ++i) m(i) = shape[static_cast<std::size_t>(i)];
  return m;
}

std::array<targets::Region, 3> formant_windows(const std::array<double, kShapeDims>& shape,
                                               std::mt19937_64& gen) {
  const auto& basis = tract::default_basis();
  const auto centre = tract::synth_sample(tract::ArticulatoryState(motor_of(shape)), basis).auditory;
  const std::array<double, 3> c{centre.f1, centre.f2, centre.f3};
  std::array<targets::Region, 3> w{};
  for (int k = 0; k < 3; ++k) w[k] = {c[k], c[k]};
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int s = 0; s < 200; ++s) {
    MotorVector m = motor_of(shape);
    for (int i = 0; i < kShapeDims; ++i) m(i) += noise(gen);
    const auto a = tract::synth_sample(tract::ArticulatoryState(m), basis).auditory;
    const std::array<double, 3> f{a.f1, a.f2, a.f3};
    for (int k = 0; k < 3; ++k) {
      w[k].min = std::min(w[k].min, f[k]);
      w[k].max = std::max(w[k].max, f[k]);
    }
  }
  for (int k = 0; k < 3; ++k) {
    w[k].min = std::round(std::min(w[k].min, c[k] * (1 - kMinHalfWidth)));
    w[k].max = std::round(std::max(w[k].max, c[k] * (1 + kMinHalfWidth)));
  }
  return w;
}

void add(targets::SpeechTarget& t, Dim d, double t0, double t1, double lo, double hi) {
  t.dims[d].push_back({t0, t1, lo, hi});
}

targets::SpeechTarget vowel(const Articulation& a, std::mt19937_64& gen) {
  targets::SpeechTarget t;
  t.name = a.name;
  t.duration_ms = 400;
  const auto w = formant_windows(a.shape, gen);
  add(t, Dim::F0, 0, 400, 114, 126);
  add(t, Dim::F1, 0, 400, w[0].min, w[0].max);
  add(t, Dim::F2, 0, 400, w[1].min, w[1].max);
  add(t, Dim::F3, 0, 400, w[2].min, w[2].max);
  add(t, Dim::pressure, 0, 400, 0.9, 1.0);
  add(t, Dim::voicing, 0, 400, 0.9, 1.0);
  return t;
}

// h-ae-p-i: breathy onset, open vowel, lip closure, close front vowel.
// Region bounds are held before the first and after the last window, so
// PA6 is left free ([0, 1]) outside the closure, and F1/F2 are loose
// during it.
targets::SpeechTarget happy(std::mt19937_64& gen) {
  targets::SpeechTarget t;
  t.name = "happy";
  t.duration_ms = 500;
  const auto ae = formant_windows(kVowels[3].shape, gen);
  const auto i = formant_windows(kVowels[0].shape, gen);
  add(t, Dim::F0, 0, 500, 114, 126);
  add(t, Dim::F1, 80, 200, ae[0].min, ae[0].max);
  add(t, Dim::F2, 80, 200, ae[1].min, ae[1].max);
  add(t, Dim::F1, 220, 280, 150, 900);
  add(t, Dim::F1, 300, 500, i[0].min, i[0].max);
  add(t, Dim::F2, 220, 280, 700, 2500);
  add(t, Dim::F2, 300, 500, i[1].min, i[1].max);
  add(t, Dim::PA6, 0, 210, 0.0, 1.0);
  add(t, Dim::PA6, 230, 270, 0.9, 1.0);
  add(t, Dim::PA6, 290, 500, 0.0, 1.0);
  add(t, Dim::pressure, 0, 500, 0.8, 1.0);
  add(t, Dim::voicing, 0, 60, 0.0, 0.3);
  add(t, Dim::voicing, 80, 210, 0.9, 1.0);
  add(t, Dim::voicing, 230, 270, 0.0, 0.3);
  add(t, Dim::voicing, 300, 500, 0.9, 1.0);
  return t;
}

// Untrained placeholder: a neutral vowel.
targets::SpeechTarget example() {
  targets::SpeechTarget t;
  t.name = "example";
  t.duration_ms = 300;
  add(t, Dim::F0, 0, 300, 114, 126);
  add(t, Dim::F1, 0, 300, 470, 530);
  add(t, Dim::F2, 0, 300, 1420, 1580);
  add(t, Dim::pressure, 0, 300, 0.9, 1.0);
  add(t, Dim::voicing, 0, 300, 0.9, 1.0);
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gen_builtin_targets <out_dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  std::mt19937_64 gen(20240601);
  std::vector<targets::SpeechTarget> all;
  for (const auto& v : kVowels) all.push_back(vowel(v, gen));
  all.push_back(happy(gen));
  all.push_back(example());
  for (const auto& t : all) {
    targets::validate(t);
    std::ofstream out(dir / (t.name + ".target"), std::ios::binary);
    out << "# generated by tools/gen_builtin_targets.cpp\n" << targets::serialize_target(t);
    std::cout << targets::serialize_target(t) << '\n';
  }
  return 0;
}
