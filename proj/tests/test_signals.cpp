#include "doctest.h"
#include "oracles.hpp"

#include "divakit/signals.hpp"

#include <queue>
#include <random>

using namespace divakit;
using signals::DelayLine;
using signals::FirFilter;

TEST_CASE("delay line: zero length is the identity") {
  DelayLine<double> d(0);
  CHECK(d.push(7.0) == 7.0);
}

TEST_CASE("delay line: fill then shift") {
  DelayLine<double> d(2, 0.0);
  CHECK(d.push(1) == 0);
  CHECK(d.push(2) == 0);
  CHECK(d.push(3) == 1);
}

TEST_CASE("delay line matches a FIFO queue") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  DelayLine<double> d(5, -1.0);
  std::queue<double> q;
  for (int i = 0; i < 5; ++i) q.push(-1.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = nd(gen);
    q.push(x);
    const double expect = q.front();
    q.pop();
    REQUIRE(d.push(x) == expect);
  }
}

TEST_CASE("delay line shifts an impulse by exactly its length") {
  for (std::size_t len : {1u, 3u, 17u}) {
    DelayLine<double> d(len, 0.0);
    for (std::size_t n = 0; n < 3 * len + 1; ++n) {
      const double y = d.push(n == 0 ? 1.0 : 0.0);
      CHECK(y == (n == len ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("delay line carries vector samples") {
  DelayLine<AudVector> d(1, AudVector::Zero());
  CHECK(d.push(AudVector::Ones()).isZero(0));
  CHECK(d.push(AudVector::Zero()) == AudVector::Ones());
}

TEST_CASE("fir: identity and step response") {
  FirFilter<double> id({1.0});
  for (double x : {3.0, -2.5, 0.0}) CHECK(id.apply(x) == x);

  FirFilter<double> avg({0.5, 0.5});
  CHECK(avg.apply(1) == 0.5);
  for (int i = 0; i < 4; ++i) CHECK(avg.apply(1) == 1.0);
}

TEST_CASE("fir matches direct convolution") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  std::vector<double> b(8), x(256);
  for (auto& v : b) v = nd(gen);
  for (auto& v : x) v = nd(gen);
  const auto expect = testing::direct_convolution(b, x);
  FirFilter<double> f(b);
  for (std::size_t n = 0; n < x.size(); ++n) CHECK(f.apply(x[n]) == doctest::Approx(expect[n]).epsilon(1e-12));
}

TEST_CASE("fir is linear") {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> nd;
  std::vector<double> b(6);
  for (auto& v : b) v = nd(gen);
  FirFilter<double> fx(b), fy(b), fs(b);
  for (int n = 0; n < 200; ++n) {
    const double x = nd(gen), y = nd(gen);
    const double sum = fx.apply(x) + fy.apply(y);
    CHECK(std::abs(fs.apply(x + y) - sum) < 1e-12);
  }
}

TEST_CASE("fir: empty taps rejected, reset primes history") {
  CHECK_THROWS_AS(FirFilter<double>(std::vector<double>{}), ValidationError);
  FirFilter<double> f({0.25, 0.5, 0.25});
  f.reset(2.0);
  CHECK(f.apply(2.0) == 2.0);
  CHECK(f.group_delay() == 1);
}

TEST_CASE("rng: deterministic constant ignores the range") {
  signals::Rng rng(3, signals::RngMode::deterministic);
  rng.set_constant("jitter", 0.0);
  CHECK(rng.uniform("jitter", -5, 5) == 0.0);
  CHECK(rng.uniform("jitter", 1, 2) == 0.0);
  CHECK(rng.uniform("unset", 1, 3) == 2.0);
}

TEST_CASE("rng: same seed gives the same stream") {
  signals::Rng a(42), b(42);
  for (int i = 0; i < 10000; ++i) REQUIRE(a.uniform("x", 0, 1) == b.uniform("x", 0, 1));
}

TEST_CASE("rng: channels are independent of draw order") {
  signals::Rng a(9), b(9);
  std::vector<double> ax, bx;
  for (int i = 0; i < 50; ++i) {
    ax.push_back(a.uniform("x", 0, 1));
    a.uniform("y", 0, 1);
  }
  for (int i = 0; i < 50; ++i) bx.push_back(b.uniform("x", 0, 1));
  CHECK(ax == bx);
}

TEST_CASE("rng: range and mean on [-1, 1)") {
  signals::Rng rng(1);
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.uniform("u", -1, 1);
    REQUIRE(v >= -1);
    REQUIRE(v < 1);
    sum += v;
  }
  CHECK(std::abs(sum / n) < 0.02);
}

TEST_CASE("rng: lo > hi rejected") {
  signals::Rng rng(1);
  CHECK_THROWS_AS(rng.uniform("x", 2, 1), ValidationError);
}
