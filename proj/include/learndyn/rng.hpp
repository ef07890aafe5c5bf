#ifndef LEARNDYN_RNG_HPP
#define LEARNDYN_RNG_HPP

#include <cstdint>
#include <random>

namespace learndyn {

/// SplitMix64 finalizer. Used to derive independent seed streams:
/// stream k of a run seeded with s uses seed s ^ splitmix64(k).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return seed ^ splitmix64(stream);
}

// Draws are defined on top of the raw mt19937_64 output so that the
// sequence does not depend on the standard library's distribution classes:
//   uniform01()  = (x >> 11) * 2^-53          in [0, 1)
//   below(n)     = floor(uniform01() * n)     in {0, ..., n-1}
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t below(std::size_t n) {
    auto k = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace learndyn

#endif  // LEARNDYN_RNG_HPP
