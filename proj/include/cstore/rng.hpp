#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "cstore/bytes.hpp"

namespace cstore {

// Seeded generator with portable derived draws. std::mt19937_64 output is fully
// specified by the standard; the std distributions are not, so draws are built
// directly from raw output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, label); labels keep subsystems decoupled.
  static Rng derive(std::uint64_t seed, std::string_view label);
  static Rng derive(std::uint64_t seed, std::string_view label, std::uint64_t index);

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n), rejection sampled. n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Uniform in [0, 1) with 53 bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  void fill(std::span<std::uint8_t> out);

 private:
  std::mt19937_64 engine_;
};

}  // namespace cstore
