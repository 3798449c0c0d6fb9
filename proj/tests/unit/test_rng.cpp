#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "glift/rng.hpp"

using namespace glift;

TEST_SUITE("rng") {

TEST_CASE("philox known-answer vectors") {
  using B = Philox::Block;
  CHECK(Philox::bijection(B{0, 0, 0, 0}, {0, 0}) ==
        B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox::bijection(B{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          {0xffffffffu, 0xffffffffu}) ==
        B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox::bijection(B{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          {0xa4093822u, 0x299f31d0u}) ==
        B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("engine output is the bijection of consecutive counters") {
  Philox eng(0x1234567890abcdefULL, 7);
  const std::array<std::uint32_t, 2> key{0x90abcdefu, 0x12345678u};
  for (std::uint32_t block = 0; block < 3; ++block) {
    const auto expect = Philox::bijection({block, 0, 7, 0}, key);
    for (int i = 0; i < 4; ++i) CHECK(eng() == expect[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("streams are reproducible and distinct") {
  Philox a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 64; ++i) {
    const auto va = a();
    CHECK(va == b());
    differs_stream |= va != c();
    differs_seed |= va != d();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);
  CHECK(trial_stream(2, 5) == ((2ULL << 32) | 5ULL));
}

TEST_CASE("uniform_int stays in range and sample_without_replacement is sorted and distinct") {
  Sampler s(9);
  for (int i = 0; i < 1000; ++i) {
    const Index v = s.uniform_int(-3, 4);
    CHECK(v >= -3);
    CHECK(v <= 4);
  }
  for (int i = 0; i < 200; ++i) {
    const SupportSet t = s.sample_without_replacement(20, 7);
    REQUIRE(t.size() == 7);
    CHECK(std::is_sorted(t.begin(), t.end()));
    CHECK(std::set<Index>(t.begin(), t.end()).size() == 7);
    CHECK(t.front() >= 0);
    CHECK(t.back() < 20);
  }
  CHECK(s.sample_without_replacement(5, 5) == SupportSet{0, 1, 2, 3, 4});
  CHECK(s.sample_without_replacement(5, 0).empty());
}

TEST_CASE("standard normal moments") {
  Sampler s(11);
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    m1 += x;
    m2 += x * x;
  }
  m1 /= n;
  m2 /= n;
  CHECK(std::abs(m1) < 5.0 / std::sqrt(n));
  CHECK(std::abs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

}  // TEST_SUITE
