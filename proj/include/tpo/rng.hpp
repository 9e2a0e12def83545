#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace tpo {

// Deterministic RNG used everywhere in the lab. mt19937_64 has a fully
// specified output stream; the double and Gaussian constructions below are
// hand-rolled because std::*_distribution is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_open() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  // Standard normal via Box-Muller with a cached spare.
  double gaussian();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64; used to derive independent per-entity seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// FNV-1a over a string, for seeding from identifiers.
std::uint64_t hash_string(const std::string& s);

}  // namespace tpo
