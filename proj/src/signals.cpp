#include "divakit/signals.hpp"

#include <sstream>

namespace divakit::signals {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t Xoshiro256::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double Rng::uniform(const std::string& channel, double lo, double hi) {
  if (lo > hi) {
    std::ostringstream msg;
    msg << "invalid range for channel '" << channel << "': lo " << lo << " > hi " << hi;
    throw ValidationError(msg.str());
  }
  if (mode_ == RngMode::deterministic) {
    auto it = constants_.find(channel);
    return it != constants_.end() ? it->second : 0.5 * (lo + hi);
  }
  auto it = streams_.find(channel);
  if (it == streams_.end()) {
    it = streams_.emplace(channel, Xoshiro256(seed_ ^ fnv1a64(channel))).first;
  }
  return lo + (hi - lo) * it->second.next_double();
}

}  // namespace divakit::signals
