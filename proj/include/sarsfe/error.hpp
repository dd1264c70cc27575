#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sarsfe {

enum class ErrorKind {
  InvalidData,
  Parameter,
  Format,
  Size,
  Numerical,
  Structural,
  Protocol,
  EmptyDataset,
  DuplicateId,
  Config,
  File,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by file readers; carries the byte offset at which parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(ErrorKind::Format, what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Non-finite values during forward/backward. `where` is a layer index or parameter name.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::string where)
      : Error(ErrorKind::Numerical, what + " [" + where + "]"), where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace sarsfe
