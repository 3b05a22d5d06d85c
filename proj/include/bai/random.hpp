#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace bai {

/// splitmix64 finalizer (Steele, Lea & Flood). Bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives the seed of child stream `index` from `parent`:
///   derive_seed(parent, index) = mix64(mix64(parent) ^ mix64(index + 0x632BE59BD9B4E019)).
/// Used both for per-trial seeds (index = trial number) and for splitting a
/// trial seed into tagged sub-streams (index = one of the StreamTag values).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(mix64(parent) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

/// Sub-stream tags split off a trial seed.
enum class StreamTag : std::uint64_t {
  instance = 1,  // random instance generation (case recipes)
  rewards = 2,   // reward draws X_{a,t}
  sampling = 3,  // randomized arm selection
  ties = 4,      // recommendation tie-breaking
};

constexpr std::uint64_t derive_seed(std::uint64_t parent, StreamTag tag) noexcept {
  return derive_seed(parent, static_cast<std::uint64_t>(tag));
}

/// Deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than with <random>
/// distribution classes, whose algorithms are implementation-defined:
///
///  - uniform01():   (bits >> 11) * 2^-53, in [0, 1)
///  - uniform_pos(): ((bits >> 11) + 1) * 2^-53, in (0, 1]
///  - normal():      Box-Muller cosine branch, z = sqrt(-2 ln u1) cos(2 pi u2)
///                   with u1 = uniform_pos(), u2 = uniform01() drawn in that
///                   order. Exactly two engine outputs per normal draw; the sine
///                   branch is discarded so every draw is self-contained.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform_pos() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bai
