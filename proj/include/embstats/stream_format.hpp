#pragma once

// Binary embedding stream: one header followed by fixed-size records.
//
//   header  : "EMB1" | u32 version | u32 dim | u32 layer | u8 dtype
//             | u16 model_tag_len | model_tag bytes
//   record  : u32 token_id | dim x f32
//
// All integers and floats are little-endian. dtype 0 is IEEE binary32, the
// only value accepted. Records are validated for finiteness on both sides.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <iterator>
#include <span>
#include <string>
#include <vector>

namespace embstats::stream {

inline constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kVersion = 1;

enum class DType : std::uint8_t { Float32 = 0 };

struct StreamHeader {
  std::uint32_t version = kVersion;
  std::uint32_t dim = 0;
  std::uint32_t layer = 0;
  DType dtype = DType::Float32;
  std::string model_tag;

  // Bytes the header occupies on the wire.
  std::size_t encoded_size() const noexcept { return 19 + model_tag.size(); }
  // Bytes per record.
  std::size_t record_size() const noexcept { return 4 + 4 * std::size_t{dim}; }

  friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct EmbeddingRecord {
  std::uint32_t token_id = 0;
  std::vector<float> vector;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

// Throws FormatError if the header violates its invariants.
void validate(const StreamHeader& header);

void write_header(std::ostream& sink, const StreamHeader& header);
StreamHeader read_header(std::istream& source);

class StreamWriter {
 public:
  // Writes the header immediately.
  StreamWriter(std::ostream& sink, StreamHeader header);

  // Validates dimension and finiteness before any byte of the record is
  // written, so a rejected record leaves the sink holding a valid prefix.
  void write(std::uint32_t token_id, std::span<const float> vector);
  void write(const EmbeddingRecord& record) {
    write(record.token_id, record.vector);
  }

  std::uint64_t count() const noexcept { return count_; }
  const StreamHeader& header() const noexcept { return header_; }

 private:
  std::ostream& sink_;
  StreamHeader header_;
  std::vector<unsigned char> buffer_;
  std::uint64_t count_ = 0;
};

// Writes header then all records; returns the number of records written.
std::uint64_t write_stream(const StreamHeader& header,
                           std::span<const EmbeddingRecord> records,
                           std::ostream& sink);

// Single-pass reader. Holds one record buffer; memory is O(dim) no matter
// how long the stream is. Works on non-seekable sources.
class StreamReader {
 public:
  explicit StreamReader(std::istream& source);

  const StreamHeader& header() const noexcept { return header_; }

  // Reads the next record into `out`, reusing its storage. Returns false at a
  // clean end of stream.
  bool next(EmbeddingRecord& out);

  // Positions the reader at record `index`. Requires a seekable source.
  void seek_record(std::uint64_t index);

  // Index of the next record to be read.
  std::uint64_t position() const noexcept { return index_; }

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = EmbeddingRecord;
    using difference_type = std::ptrdiff_t;
    using pointer = const EmbeddingRecord*;
    using reference = const EmbeddingRecord&;

    iterator() = default;
    explicit iterator(StreamReader* reader) : reader_(reader) { ++*this; }

    reference operator*() const { return current_; }
    pointer operator->() const { return &current_; }
    iterator& operator++() {
      if (reader_ && !reader_->next(current_)) reader_ = nullptr;
      return *this;
    }
    void operator++(int) { ++*this; }
    friend bool operator==(const iterator& a, const iterator& b) {
      return a.reader_ == b.reader_;
    }

   private:
    StreamReader* reader_ = nullptr;
    EmbeddingRecord current_;
  };

  iterator begin() { return iterator(this); }
  iterator end() { return iterator(); }

 private:
  std::istream& source_;
  StreamHeader header_;
  std::vector<unsigned char> buffer_;
  std::uint64_t index_ = 0;
};

// Reads a whole stream into memory. Convenience for tests and small files.
std::pair<StreamHeader, std::vector<EmbeddingRecord>> read_all(
    std::istream& source);

}  // namespace embstats::stream
