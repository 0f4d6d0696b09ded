#pragma once

// Elementary discrete-time blocks: delay line, FIR filter, seedable RNG.

#include "divakit/core.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace divakit::signals {

/// Fixed-length FIFO delay of `length` pushes. The first `length` pushes
/// return `fill`. Works for any copyable sample type (scalars, Eigen vectors).
template <typename Sample>
class DelayLine {
 public:
  explicit DelayLine(std::size_t length, Sample fill = Sample{})
      : length_(length), fill_(std::move(fill)) {}

  /// Push `x` and return the value pushed `length` calls earlier.
  Sample push(const Sample& x) {
    if (length_ == 0) return x;
    Sample out = peek();
    buffer_.push_back(x);
    if (buffer_.size() > length_) buffer_.pop_front();
    return out;
  }

  /// The value the next push will return. Undefined for a zero-length line.
  const Sample& peek() const {
    return buffer_.size() < length_ ? fill_ : buffer_.front();
  }

  std::size_t length() const { return length_; }
  std::size_t size() const { return buffer_.size(); }

  void reset(Sample fill) {
    fill_ = std::move(fill);
    buffer_.clear();
  }

 private:
  std::size_t length_;
  Sample fill_;
  std::deque<Sample> buffer_;
};

/// Direct-form FIR: y[n] = sum_k b[k] x[n-k]. History starts at zero
/// unless primed with `reset(value)`.
template <typename Sample, typename Coef = double>
class FirFilter {
 public:
  explicit FirFilter(std::vector<Coef> taps, Sample zero = Sample{})
      : taps_(std::move(taps)), zero_(zero) {
    if (taps_.empty()) throw ValidationError("FIR filter needs at least one tap");
    history_.assign(taps_.size() - 1, zero_);
  }

  Sample apply(const Sample& x) {
    Sample y = taps_[0] * x;
    for (std::size_t k = 1; k < taps_.size(); ++k) {
      y += taps_[k] * history_[(head_ + k - 1) % history_.size()];
    }
    if (!history_.empty()) {
      head_ = (head_ + history_.size() - 1) % history_.size();
      history_[head_] = x;
    }
    return y;
  }

  /// Fill the history as if `value` had been applied forever.
  void reset(const Sample& value) {
    std::fill(history_.begin(), history_.end(), value);
    head_ = 0;
  }

  std::span<const Coef> taps() const { return taps_; }

  /// Samples of delay for a linear-phase (symmetric) tap vector.
  std::size_t group_delay() const { return (taps_.size() - 1) / 2; }

 private:
  std::vector<Coef> taps_;
  Sample zero_;
  std::vector<Sample> history_;  // ring buffer, history_[head_] is x[n-1]
  std::size_t head_ = 0;
};

/// xoshiro256** seeded through splitmix64. Doubles use the top 53 bits.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform on [0, 1).
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t s_[4];
};

enum class RngMode { stochastic, deterministic };

/// Named-channel random source. Each channel draws from its own stream
/// derived from (seed, channel name), so draw order across channels does
/// not matter. In deterministic mode every draw returns the channel's
/// configured constant, or the midpoint of [lo, hi] when none is set.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, RngMode mode = RngMode::stochastic)
      : seed_(seed), mode_(mode) {}

  double uniform(const std::string& channel, double lo, double hi);

  void set_constant(const std::string& channel, double value) { constants_[channel] = value; }
  void set_mode(RngMode mode) { mode_ = mode; }

  RngMode mode() const { return mode_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  RngMode mode_;
  std::map<std::string, double> constants_;
  std::map<std::string, Xoshiro256> streams_;
};

/// 64-bit FNV-1a, used for channel seeding and config hashes.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace divakit::signals
