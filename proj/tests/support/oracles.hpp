#pragma once

// Independent reference constructions shared by the unit tests and the
// acceptance runner. Nothing here calls the code it is used to check.

#include "divakit/targets.hpp"
#include "divakit/tract.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace divakit::testing {

/// y[n] = sum_k b[k] x[n-k], truncated to x.size().
std::vector<double> direct_convolution(const std::vector<double>& b, const std::vector<double>& x);

/// A valid random target: 1 to 12 dims, up to 4 sorted disjoint windows
/// each, values with awkward decimal expansions.
targets::SpeechTarget random_target(std::mt19937_64& gen, int index);

struct MalformedCase {
  std::string label;
  std::string text;
  targets::Diagnostic kind;
  int line;  // line the diagnostic must name
};

/// Twelve crafted invalid target files, one or more per diagnostic class.
const std::vector<MalformedCase>& malformed_targets();

/// Uniform tube of `sections` sections of 0.4 cm and constant `area`.
tract::AreaFunction uniform_tube(int sections, double area);

/// Quarter-wave resonances (2k - 1) c / (4 L) for k = 1..3.
std::array<double, 3> quarter_wave(double length_cm, double c = tract::kSoundSpeed);

/// Impulse train at `f0` driven through cascaded two-pole resonators at
/// `formants` with bandwidths `bandwidths` (direct recursion).
std::vector<double> all_pole_vowel(double fs, double seconds, double f0,
                                   const std::array<double, 3>& formants,
                                   const std::array<double, 3>& bandwidths);

/// Unit impulses every fs / f0 samples (fractional positions rounded).
std::vector<double> pulse_train(double fs, double seconds, double f0);

std::vector<double> sine(double fs, double seconds, double hz, double amplitude = 0.5);

std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double amplitude = 0.5);

/// Closed form of d f0 / d f0_param for f0 = 120 * 2^x.
inline double f0_derivative(double x) { return 120.0 * 0.69314718055994530942 * std::exp2(x); }

/// Median of `v` (copied).
double median(std::vector<double> v);

}  // namespace divakit::testing
