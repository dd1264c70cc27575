#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace sarsfe {

/// SplitMix64 finalizer. Used as the mixing step of every keyed hash below.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Combines a sequence of 64-bit keys into one well-mixed word. Order matters.
std::uint64_t hash_keys(std::initializer_list<std::uint64_t> keys) noexcept;

/// Maps 64 random bits to a double in (0, 1]; never returns 0.
double bits_to_unit_open(std::uint64_t bits) noexcept;

/// Sequential random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the standard.
/// The distributions are implemented here rather than taken from <random>, whose
/// distribution algorithms vary between standard libraries; this keeps every draw
/// bitwise reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal (Box-Muller, one value per call).
  double normal();

  /// Derives an independent child stream keyed on `key`.
  Rng fork(std::uint64_t key) { return Rng(hash_keys({next_u64(), key})); }

 private:
  std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by Rng.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace sarsfe
