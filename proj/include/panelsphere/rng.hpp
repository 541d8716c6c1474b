#pragma once

// Counter-based random numbers: Philox4x32-10 keyed by the 64-bit master
// seed, with the 128-bit counter laid out as
//
//   (block_lo, block_hi, stream, purpose)
//
// Stream = replication index, purpose = which independent draw sequence
// inside a replication (disturbances, factors, regressors, ...). Any
// (seed, stream, purpose) tuple is an independent, reproducible sequence, so
// Monte-Carlo replications can run on any number of threads in any order and
// still produce bit-identical output. Nothing in the library ever reads
// ambient entropy.

#include <array>
#include <cmath>
#include <cstdint>

#include "panelsphere/common.hpp"

namespace panelsphere {

struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::uint64_t key, std::array<std::uint32_t, 4> ctr) {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    return ctr;
  }
};

// Purposes for the independent substreams of one replication.
enum class Draws : std::uint32_t {
  disturbance = 0,
  factors = 1,
  idiosyncratic = 2,
  loadings = 3,
  regressors = 4,
  effects = 5,
};

struct Seed {
  std::uint64_t master = 0;
  std::uint32_t stream = 0;
};

class RandomStream {
 public:
  RandomStream(Seed seed, Draws purpose)
      : key_(seed.master), stream_(seed.stream), purpose_(static_cast<std::uint32_t>(purpose)) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      buf_ = Philox4x32::block(key_, {static_cast<std::uint32_t>(block_),
                                      static_cast<std::uint32_t>(block_ >> 32), stream_, purpose_});
      ++block_;
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // [0, 1)
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }
  // (0, 1]
  double uniform_oc() { return 1.0 - uniform01(); }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_oc();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::acos(-1.0) * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Marsaglia-Tsang; shape > 0, unit scale.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw DomainError("gamma draw: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform_oc();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_oc();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  bool coin() { return (next_u32() & 1u) != 0; }

 private:
  std::uint64_t key_;
  std::uint32_t stream_;
  std::uint32_t purpose_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace panelsphere
