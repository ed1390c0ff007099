#pragma once

#include <cstdint>

namespace tailspec {

// SplitMix64 finalizer (Steele/Lea/Flood mixing constants).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream of 64-bit words keyed by (seed, hi, lo).
//
// Every stream is a SplitMix64 sequence whose initial state is derived by
// hash-chaining the three keys, so a draw is a pure function of
// (seed, hi, lo, draw index).  Streams for distinct keys can be generated
// in any order or in parallel and always produce the same values.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::int64_t hi, std::int64_t lo) {
    std::uint64_t s = mix64(seed + 0x9e3779b97f4a7c15ULL);
    s = mix64(s ^ mix64(static_cast<std::uint64_t>(hi) + 0x9e3779b97f4a7c15ULL));
    s = mix64(s ^ mix64(static_cast<std::uint64_t>(lo) + 0x3c6ef372fe94f82aULL));
    state_ = s;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform draw in the open interval (0, 1); never returns an endpoint,
  // so inverse-CDF transforms stay finite.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

 private:
  std::uint64_t state_;
};

// Derives a child seed from a parent seed and a stream label, e.g. one
// replication of a Monte Carlo loop.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^
               mix64(stream + 0x3c6ef372fe94f82aULL));
}

}  // namespace tailspec
