#ifndef HGMD_RNG_HPP
#define HGMD_RNG_HPP

#include <cstdint>
#include <random>

namespace hgmd {

using Rng = std::mt19937_64;

// Stream salts. Each consumer of randomness owns one salt so that draws in
// one place never shift draws in another.
enum class StreamSalt : std::uint64_t {
  Init = 1,
  Dropout = 2,
  Subgraph = 3,
  Mixup = 4,
  Split = 5,
  SbmEdges = 6,
  SbmFeatures = 7,
  InvariantNoise = 8,
};

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// hash(seed, salt, a, b): independent stream key for e.g. (epoch, node).
constexpr std::uint64_t stream_key(std::uint64_t seed, StreamSalt salt,
                                   std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ static_cast<std::uint64_t>(salt));
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

inline Rng make_stream(std::uint64_t seed, StreamSalt salt, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  return Rng(stream_key(seed, salt, a, b));
}

// Uniform on [0, 1).
inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Beta(alpha, alpha) via the ratio of two Gamma(alpha, 1) draws.
inline double sample_symmetric_beta(Rng& rng, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double x = gamma(rng);
  const double y = gamma(rng);
  const double s = x + y;
  return s > 0.0 ? x / s : 0.5;
}

}  // namespace hgmd

#endif  // HGMD_RNG_HPP
