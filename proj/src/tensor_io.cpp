#include "sarsfe/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sarsfe/error.hpp"

namespace sarsfe {
namespace {

static_assert(std::endian::native == std::endian::little,
              "SFET I/O assumes a little-endian host");

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T load_le(const std::uint8_t* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

template <typename T>
std::vector<std::uint8_t> encode_impl(std::span<const std::uint64_t> shape, std::span<const T> values,
                                      DType dtype) {
  if (shape.size() > 255) throw Error(ErrorKind::Parameter, "SFET supports at most 255 dimensions");
  std::uint64_t numel = 1;
  for (auto d : shape) numel *= d;
  if (numel != values.size()) {
    throw Error(ErrorKind::Parameter, "tensor shape has " + std::to_string(numel) +
                                          " elements but " + std::to_string(values.size()) +
                                          " values were given");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kSfetHeaderSize + 8 * shape.size() + sizeof(T) * values.size());
  out.insert(out.end(), {'S', 'F', 'E', 'T'});
  out.push_back(kSfetVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(static_cast<std::uint8_t>(shape.size()));
  out.insert(out.end(), 5, 0);
  for (auto d : shape) append_le<std::uint64_t>(out, d);
  for (auto v : values) append_le<T>(out, v);
  return out;
}

}  // namespace

std::uint64_t TensorData::numel() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_tensor(std::span<const std::uint64_t> shape,
                                        std::span<const float> values) {
  return encode_impl<float>(shape, values, DType::F32);
}

std::vector<std::uint8_t> encode_tensor(std::span<const std::uint64_t> shape,
                                        std::span<const double> values) {
  return encode_impl<double>(shape, values, DType::F64);
}

TensorData decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kSfetHeaderSize) throw FormatError("SFET header truncated", bytes.size());
  if (std::memcmp(bytes.data(), "SFET", 4) != 0) throw FormatError("bad SFET magic", 0);
  if (bytes[4] != kSfetVersion) {
    throw FormatError("unsupported SFET version " + std::to_string(bytes[4]), 4);
  }
  if (bytes[5] > 1) throw FormatError("unknown SFET dtype " + std::to_string(bytes[5]), 5);
  for (std::size_t i = 7; i < kSfetHeaderSize; ++i) {
    if (bytes[i] != 0) throw FormatError("reserved SFET byte is not zero", i);
  }

  TensorData t;
  t.dtype = static_cast<DType>(bytes[5]);
  const std::size_t ndim = bytes[6];
  std::size_t offset = kSfetHeaderSize;
  if (bytes.size() < offset + 8 * ndim) throw FormatError("SFET dimensions truncated", bytes.size());
  t.shape.resize(ndim);
  for (std::size_t i = 0; i < ndim; ++i, offset += 8) {
    t.shape[i] = load_le<std::uint64_t>(bytes.data() + offset);
  }

  const std::uint64_t numel = t.numel();
  const std::size_t elem = t.dtype == DType::F32 ? 4 : 8;
  if ((bytes.size() - offset) / elem < numel) {
    throw FormatError("SFET payload truncated: expected " + std::to_string(numel) + " values",
                      bytes.size());
  }
  if (bytes.size() - offset != numel * elem) {
    throw FormatError("trailing bytes after SFET payload", offset + numel * elem);
  }
  t.values.resize(numel);
  for (std::uint64_t i = 0; i < numel; ++i, offset += elem) {
    t.values[i] = t.dtype == DType::F32 ? static_cast<double>(load_le<float>(bytes.data() + offset))
                                        : load_le<double>(bytes.data() + offset);
  }
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::File, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::File, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::File, "write failed for " + path.string());
}

void write_tensor(const std::filesystem::path& path, std::span<const std::uint64_t> shape,
                  std::span<const float> values) {
  write_file_bytes(path, encode_tensor(shape, values));
}

void write_tensor(const std::filesystem::path& path, std::span<const std::uint64_t> shape,
                  std::span<const double> values) {
  write_file_bytes(path, encode_tensor(shape, values));
}

TensorData read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

bool is_sfet_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::memcmp(magic, "SFET", 4) == 0;
}

}  // namespace sarsfe
