#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace orderflow {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

inline double bits_to_unit(std::uint64_t bits) {  // [0, 1)
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Splittable stream: a child is a pure function of (parent key, stream id),
// so realizations are reproducible whatever order they run in.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix_key(seed, stream)), engine_(key_) {}

  RandomStream split(std::uint64_t stream) const { return RandomStream(key_, stream + 1); }

  std::uint64_t key() const { return key_; }
  std::mt19937_64& engine() { return engine_; }

  std::uint64_t bits() { return engine_(); }
  double uniform() { return bits_to_unit(engine_()); }
  double uniform_pos() { return 1.0 - uniform(); }  // (0, 1]
  double normal() { return normal_(engine_); }
  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }
  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<std::uint64_t>(mean)(engine_);
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Standard normal that depends only on (key, id): used for per-metaorder noise.
inline double keyed_normal(std::uint64_t key, std::uint64_t id) {
  std::uint64_t h = mix_key(key, id);
  double u1 = 1.0 - bits_to_unit(h);
  double u2 = bits_to_unit(splitmix64(h));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline double keyed_uniform(std::uint64_t key, std::uint64_t id) { return bits_to_unit(mix_key(key, id)); }

}  // namespace orderflow
