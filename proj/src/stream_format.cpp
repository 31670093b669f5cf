#include "embstats/stream_format.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "embstats/error.hpp"

namespace embstats::stream {
namespace {

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(unsigned char* out, std::uint32_t v) {
  out[0] = static_cast<unsigned char>(v & 0xff);
  out[1] = static_cast<unsigned char>((v >> 8) & 0xff);
  out[2] = static_cast<unsigned char>((v >> 16) & 0xff);
  out[3] = static_cast<unsigned char>(v >> 24);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  unsigned char b[4];
  put_u32(b, v);
  out.insert(out.end(), b, b + 4);
}

std::uint32_t get_u32(const unsigned char* in) {
  return std::uint32_t{in[0]} | (std::uint32_t{in[1]} << 8) |
         (std::uint32_t{in[2]} << 16) | (std::uint32_t{in[3]} << 24);
}

std::uint16_t get_u16(const unsigned char* in) {
  return static_cast<std::uint16_t>(in[0] | (in[1] << 8));
}

bool read_exact(std::istream& in, unsigned char* dst, std::size_t n,
                std::size_t& got) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  got = static_cast<std::size_t>(in.gcount());
  return got == n;
}

}  // namespace

void validate(const StreamHeader& header) {
  if (header.version != kVersion) {
    throw FormatError(fmt::format("unsupported stream version {}", header.version));
  }
  if (header.dim < 1) throw FormatError("stream dim must be >= 1");
  if (header.dtype != DType::Float32) {
    throw FormatError(fmt::format("unsupported dtype {}",
                                  static_cast<int>(header.dtype)));
  }
  if (header.model_tag.size() > 0xffff) {
    throw FormatError("model tag longer than 65535 bytes");
  }
}

void write_header(std::ostream& sink, const StreamHeader& header) {
  validate(header);
  std::vector<unsigned char> bytes(kMagic, kMagic + 4);
  put_u32(bytes, header.version);
  put_u32(bytes, header.dim);
  put_u32(bytes, header.layer);
  bytes.push_back(static_cast<unsigned char>(header.dtype));
  put_u16(bytes, static_cast<std::uint16_t>(header.model_tag.size()));
  bytes.insert(bytes.end(), header.model_tag.begin(), header.model_tag.end());
  sink.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw InputError("failed writing stream header");
}

StreamHeader read_header(std::istream& source) {
  unsigned char fixed[19];
  std::size_t got = 0;
  if (!read_exact(source, fixed, sizeof fixed, got)) {
    throw FormatError(fmt::format("truncated stream header ({} of 19 bytes)", got));
  }
  if (std::memcmp(fixed, kMagic, 4) != 0) throw FormatError("bad stream magic");
  StreamHeader h;
  h.version = get_u32(fixed + 4);
  h.dim = get_u32(fixed + 8);
  h.layer = get_u32(fixed + 12);
  h.dtype = static_cast<DType>(fixed[16]);
  const std::uint16_t tag_len = get_u16(fixed + 17);
  h.model_tag.resize(tag_len);
  if (tag_len > 0) {
    source.read(h.model_tag.data(), tag_len);
    if (static_cast<std::size_t>(source.gcount()) != tag_len) {
      throw FormatError("truncated model tag in stream header");
    }
  }
  validate(h);
  return h;
}

StreamWriter::StreamWriter(std::ostream& sink, StreamHeader header)
    : sink_(sink), header_(std::move(header)) {
  write_header(sink_, header_);
  buffer_.resize(header_.record_size());
}

void StreamWriter::write(std::uint32_t token_id, std::span<const float> vector) {
  if (vector.size() != header_.dim) {
    throw DimensionError(count_, header_.dim, vector.size());
  }
  for (std::size_t i = 0; i < vector.size(); ++i) {
    if (!std::isfinite(vector[i])) throw DataError(count_, i);
  }
  put_u32(buffer_.data(), token_id);
  for (std::size_t i = 0; i < vector.size(); ++i) {
    put_u32(buffer_.data() + 4 + 4 * i, std::bit_cast<std::uint32_t>(vector[i]));
  }
  sink_.write(reinterpret_cast<const char*>(buffer_.data()),
              static_cast<std::streamsize>(buffer_.size()));
  if (!sink_) throw InputError("failed writing stream record");
  ++count_;
}

std::uint64_t write_stream(const StreamHeader& header,
                           std::span<const EmbeddingRecord> records,
                           std::ostream& sink) {
  StreamWriter writer(sink, header);
  for (const auto& r : records) writer.write(r);
  return writer.count();
}

StreamReader::StreamReader(std::istream& source)
    : source_(source), header_(read_header(source)) {
  buffer_.resize(header_.record_size());
}

bool StreamReader::next(EmbeddingRecord& out) {
  std::size_t got = 0;
  if (!read_exact(source_, buffer_.data(), buffer_.size(), got)) {
    if (got == 0) return false;
    const std::uint64_t start = header_.encoded_size() + index_ * buffer_.size();
    throw TruncationError(start, start + got);
  }
  out.token_id = get_u32(buffer_.data());
  out.vector.resize(header_.dim);
  for (std::size_t i = 0; i < header_.dim; ++i) {
    const float v = std::bit_cast<float>(get_u32(buffer_.data() + 4 + 4 * i));
    if (!std::isfinite(v)) throw DataError(index_, i);
    out.vector[i] = v;
  }
  ++index_;
  return true;
}

void StreamReader::seek_record(std::uint64_t index) {
  const auto offset = header_.encoded_size() + index * header_.record_size();
  source_.clear();
  source_.seekg(static_cast<std::streamoff>(offset));
  if (!source_) throw InputError("stream source is not seekable");
  index_ = index;
}

std::pair<StreamHeader, std::vector<EmbeddingRecord>> read_all(
    std::istream& source) {
  StreamReader reader(source);
  std::vector<EmbeddingRecord> records;
  EmbeddingRecord r;
  while (reader.next(r)) records.push_back(r);
  return {reader.header(), std::move(records)};
}

}  // namespace embstats::stream
