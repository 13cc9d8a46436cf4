#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nexrl {

/// SplitMix64 finalizer; decorrelates nearby seed values.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives the seed of a named substream. Every random draw in the project
/// flows from one master seed through chains of these calls, so parallel and
/// serial generation orders see identical streams.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index));
}

inline std::uint64_t substream(std::uint64_t seed, std::string_view tag) {
  return substream(seed, hash_tag(tag));
}

inline std::uint64_t substream(std::uint64_t seed, std::string_view tag,
                               std::uint64_t index) {
  return substream(substream(seed, tag), index);
}

/// Seeded generator for one substream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> dist(mean, stddev);
    return dist(engine_);
  }

  double uniform(double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(engine_);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    std::uniform_int_distribution<int> dist(lo, hi);
    return dist(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nexrl
