#include "sarsfe/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "sarsfe/error.hpp"

namespace sarsfe {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidData: return "invalid data";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Size: return "size error";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::Structural: return "structural error";
    case ErrorKind::Protocol: return "protocol error";
    case ErrorKind::EmptyDataset: return "empty dataset";
    case ErrorKind::DuplicateId: return "duplicate id";
    case ErrorKind::Config: return "config error";
    case ErrorKind::File: return "file error";
  }
  return "error";
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_keys(std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (auto k : keys) h = mix64(h ^ mix64(k));
  return h;
}

double bits_to_unit_open(std::uint64_t bits) noexcept {
  // 53 mantissa bits, shifted into (0, 1].
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::Parameter, "uniform_int requires n > 0");
  // Rejection sampling on the largest multiple of n below 2^64.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  const double u1 = bits_to_unit_open(engine_());
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace sarsfe
