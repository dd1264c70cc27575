#pragma once

// SFET tensor files.
//
// Layout (all integers little-endian):
//   bytes 0..3   magic "SFET"
//   byte  4      version (1)
//   byte  5      dtype (0 = f32, 1 = f64)
//   byte  6      ndim
//   bytes 7..11  reserved, zero
//   ndim x u64   dimensions
//   payload      row-major, little-endian values

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sarsfe {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

inline constexpr std::uint8_t kSfetVersion = 1;
inline constexpr std::size_t kSfetHeaderSize = 12;

/// A decoded tensor. Values are widened to double; f32 payloads round-trip exactly.
struct TensorData {
  DType dtype = DType::F32;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;

  std::uint64_t numel() const;
};

std::vector<std::uint8_t> encode_tensor(std::span<const std::uint64_t> shape,
                                        std::span<const float> values);
std::vector<std::uint8_t> encode_tensor(std::span<const std::uint64_t> shape,
                                        std::span<const double> values);
TensorData decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, std::span<const std::uint64_t> shape,
                  std::span<const float> values);
void write_tensor(const std::filesystem::path& path, std::span<const std::uint64_t> shape,
                  std::span<const double> values);
TensorData read_tensor(const std::filesystem::path& path);

/// True when the first bytes of the file are the SFET magic.
bool is_sfet_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace sarsfe
