#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace agtm {

/// Portable seeded generator: SplitMix64.
///
/// State is a single 64-bit word advanced by the golden-ratio increment and
/// finalized with the MurmurHash3-style mixer. Every derived draw (bounded
/// integers, doubles, shuffles) is defined here so that sequences are identical
/// across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n) by rejection of the low remainder zone.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller; one draw consumes two uniforms.
  double normal();

  /// Fisher-Yates, walking from the back.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// Derives an independent stream seed from (seed, stream).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::uint64_t state_;
};

}  // namespace agtm
