#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace listenlab {

// 64-bit counter-based generator using the splitmix64 finalizer.
// Splittable: a child stream is keyed by (parent key, stream id), so any
// clip or parameter can be regenerated in isolation without drawing the
// rest of the sequence. Output is identical on every platform.
class CounterRng {
 public:
  explicit CounterRng(uint64_t seed, uint64_t stream = 0)
      : key_(mix(mix(seed + 0x9e3779b97f4a7c15ull) ^ mix(stream + 0x6a09e667f3bcc909ull))) {}

  CounterRng split(uint64_t stream) const {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(stream + 0xbb67ae8584caa73bull));
    child.counter_ = 0;
    return child;
  }
  CounterRng split(std::string_view name) const { return split(hash_str(name)); }

  uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ull); }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; draws two uniforms per sample (no caching, determinism is
  // independent of call interleaving).
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Knuth's product method; fine for the small rates used here.
  int poisson(double lambda) {
    double limit = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= next_double();
    } while (p > limit);
    return k - 1;
  }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // FNV-1a.
  static uint64_t hash_str(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace listenlab
