#include "embstats/error.hpp"

#include <fmt/format.h>

namespace embstats {

TruncationError::TruncationError(std::uint64_t record_offset,
                                 std::uint64_t end_offset)
    : Error("truncation",
            fmt::format("truncated record at byte offset {} (data ends at {})",
                        record_offset, end_offset)),
      offset_(record_offset),
      end_offset_(end_offset) {}

DataError::DataError(std::uint64_t record_index, std::uint64_t component)
    : Error("data", fmt::format("non-finite component {} in record {}",
                                component, record_index)),
      record_index_(record_index),
      component_(component) {}

DimensionError::DimensionError(std::uint64_t record_index,
                               std::uint64_t expected, std::uint64_t actual)
    : Error("dimension",
            fmt::format("record {} has dimension {}, expected {}",
                        record_index, actual, expected)),
      record_index_(record_index) {}

}  // namespace embstats
