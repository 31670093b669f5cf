#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace embstats {

// Base of every error raised by the library. kind() is a short stable tag
// used by the CLI for machine-parseable error lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Malformed header, bad magic/version/dtype, malformed text files.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

// Stream ended inside a record.
class TruncationError : public Error {
 public:
  TruncationError(std::uint64_t record_offset, std::uint64_t end_offset);

  // Byte offset where the incomplete record starts.
  std::uint64_t offset() const noexcept { return offset_; }
  // Byte offset where the data actually ended.
  std::uint64_t end_offset() const noexcept { return end_offset_; }

 private:
  std::uint64_t offset_;
  std::uint64_t end_offset_;
};

// Non-finite component in a record or input vector.
class DataError : public Error {
 public:
  DataError(std::uint64_t record_index, std::uint64_t component);

  std::uint64_t record_index() const noexcept { return record_index_; }
  std::uint64_t component() const noexcept { return component_; }

 private:
  std::uint64_t record_index_;
  std::uint64_t component_;
};

class DimensionError : public Error {
 public:
  DimensionError(std::uint64_t record_index, std::uint64_t expected,
                 std::uint64_t actual);
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}

  std::uint64_t record_index() const noexcept { return record_index_; }

 private:
  std::uint64_t record_index_ = 0;
};

// Numerically meaningless request: empty input, zero variance, zero mean,
// rank deficiency, Jensen violation beyond round-off.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error("input", what) {}
};

}  // namespace embstats
