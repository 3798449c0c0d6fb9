#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "glift/common.hpp"

namespace glift {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The 64-bit key is the user seed. The 128-bit counter is split into a
/// 64-bit block position (low half) and a 64-bit stream id (high half), so
/// `Philox(seed, stream)` for distinct streams gives independent sequences
/// without any shared state. Experiment trial t uses stream t at every grid
/// point (common random numbers), so its draws are a pure function of
/// (seed, trial) regardless of scheduling.
///
/// Satisfies UniformRandomBitGenerator with 32-bit output.
class Philox {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        counter_{0, 0, static_cast<std::uint32_t>(stream),
                 static_cast<std::uint32_t>(stream >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      buffer_ = bijection(counter_, key_);
      if (++counter_[0] == 0) ++counter_[1];
      pos_ = 0;
    }
    return buffer_[pos_++];
  }

  /// The keyed Philox bijection on one counter block.
  static Block bijection(Block ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint64_t kM0 = 0xD2511F53u;
    constexpr std::uint64_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = kM0 * ctr[0];
      const std::uint64_t p1 = kM1 * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }

 private:
  std::array<std::uint32_t, 2> key_;
  Block counter_;
  Block buffer_{};
  int pos_ = 4;
};

/// Packs a 32-bit group id and a 32-bit trial index into one stream id.
inline std::uint64_t trial_stream(std::uint64_t point, std::uint64_t trial) {
  return (point << 32) | (trial & 0xffffffffu);
}

/// Sampling helpers on top of a Philox stream. Distributions come from
/// Boost.Random so the sequences are identical across standard libraries.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed, std::uint64_t stream = 0) : engine_(seed, stream) {}

  double normal(double stddev = 1.0) { return stddev * normal_(engine_); }

  /// Real and imaginary parts i.i.d. N(0, stddev^2).
  cplx complex_normal(double stddev = 1.0) {
    const double re = normal(stddev);
    const double im = normal(stddev);
    return {re, im};
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(engine_()) / 4294967296.0);
  }

  /// Uniform integer in [lo, hi].
  Index uniform_int(Index lo, Index hi) {
    boost::random::uniform_int_distribution<long long> dist(lo, hi);
    return static_cast<Index>(dist(engine_));
  }

  RMatrix normal_matrix(Index rows, Index cols, double stddev = 1.0);
  CMatrix complex_normal_matrix(Index rows, Index cols, double stddev = 1.0);
  CVector complex_normal_vector(Index n, double stddev = 1.0);

  /// `count` distinct indices drawn uniformly from [0, n), returned sorted.
  SupportSet sample_without_replacement(Index n, Index count);

  Philox& engine() { return engine_; }

 private:
  Philox engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace glift
