#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>
#include <streambuf>

#include "embstats/error.hpp"
#include "embstats/stream_format.hpp"
#include "embstats/vocab.hpp"
#include "oracles.hpp"

using namespace embstats;
using namespace embstats::stream;

namespace {

StreamHeader header_with_dim(std::uint32_t dim, std::string tag = "") {
  StreamHeader h;
  h.dim = dim;
  h.layer = 6;
  h.model_tag = std::move(tag);
  return h;
}

// Serves a fixed byte string but refuses to seek, like a pipe.
class PipeBuf : public std::streambuf {
 public:
  explicit PipeBuf(std::string data) : data_(std::move(data)) {
    setg(data_.data(), data_.data(), data_.data() + data_.size());
  }

 private:
  std::string data_;
};

}  // namespace

TEST_CASE("file size follows the layout") {
  std::ostringstream out;
  const std::vector<EmbeddingRecord> recs{{7, {3.0f, 4.0f}}};
  const auto h = header_with_dim(2);
  CHECK(write_stream(h, recs, out) == 1);
  CHECK(out.str().size() == h.encoded_size() + 4 + 8);
  CHECK(h.encoded_size() == 19);
}

TEST_CASE("header bytes are little-endian and bit-exact") {
  std::ostringstream out;
  write_header(out, header_with_dim(0x0102, "ab"));
  const std::string expected("EMB1\x01\x00\x00\x00\x02\x01\x00\x00\x06\x00\x00\x00\x00\x02\x00"
                             "ab",
                             21);
  CHECK(out.str() == expected);

  std::ostringstream rec;
  StreamWriter w(rec, header_with_dim(1));
  w.write(0x0a0b0c0d, std::vector<float>{1.0f});
  const auto body = rec.str().substr(19);
  // token id, then 1.0f = 0x3f800000
  CHECK(body == std::string("\x0d\x0c\x0b\x0a\x00\x00\x80\x3f", 8));
}

TEST_CASE("dimension mismatch is rejected with the record index") {
  std::ostringstream out;
  StreamWriter w(out, header_with_dim(3));
  w.write(1, std::vector<float>{1, 2, 3});
  try {
    w.write(2, std::vector<float>{1, 2});
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(e.record_index() == 1);
  }
  CHECK(w.count() == 1);

  std::ostringstream out2;
  const std::vector<EmbeddingRecord> bad{{0, {1.0f, 2.0f}}};
  try {
    write_stream(header_with_dim(3), bad, out2);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(e.record_index() == 0);
  }
}

TEST_CASE("non-finite components are rejected on write") {
  std::ostringstream out;
  StreamWriter w(out, header_with_dim(3));
  w.write(1, std::vector<float>{0, 0, 0});
  try {
    w.write(1, std::vector<float>{0, std::numeric_limits<float>::infinity(), 0});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.record_index() == 1);
    CHECK(e.component() == 1);
  }
  CHECK_THROWS_AS(w.write(1, std::vector<float>{std::nanf(""), 0, 0}), DataError);
}

TEST_CASE("round trip reproduces header and records bit-exactly") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng() % 12;
    auto recs = oracle::random_records(rng, rng() % 300, d, 50, -1e6f, 1e6f);
    // include denormals, zeros of both signs and extreme finite values
    if (!recs.empty()) {
      recs[0].vector[0] = -0.0f;
      recs.back().vector.back() = std::numeric_limits<float>::denorm_min();
    }
    auto h = header_with_dim(static_cast<std::uint32_t>(d), "model-" + std::to_string(trial));
    h.layer = static_cast<std::uint32_t>(trial);
    std::stringstream io;
    CHECK(write_stream(h, recs, io) == recs.size());
    const auto [h2, recs2] = read_all(io);
    CHECK(h2 == h);
    REQUIRE(recs2.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(recs2[i].token_id == recs[i].token_id);
      for (std::size_t j = 0; j < d; ++j) {
        CHECK(std::bit_cast<std::uint32_t>(recs2[i].vector[j]) ==
              std::bit_cast<std::uint32_t>(recs[i].vector[j]));
      }
    }
  }
}

TEST_CASE("1000 random records round trip") {
  std::mt19937_64 rng(7);
  const auto recs = oracle::random_records(rng, 1000, 2, 30);
  std::stringstream io;
  CHECK(write_stream(header_with_dim(2), recs, io) == 1000);
  CHECK(read_all(io).second == recs);
}

TEST_CASE("empty body yields no records") {
  std::stringstream io;
  write_header(io, header_with_dim(4));
  StreamReader reader(io);
  EmbeddingRecord r;
  CHECK_FALSE(reader.next(r));
  CHECK(reader.begin() == reader.end());
}

TEST_CASE("truncated final record reports its offset") {
  std::mt19937_64 rng(3);
  const auto h = header_with_dim(5, "tag");
  const auto recs = oracle::random_records(rng, 10, 5, 3);
  std::ostringstream out;
  write_stream(h, recs, out);
  const std::string full = out.str();
  const std::size_t rs = h.record_size();
  for (std::size_t cut : {std::size_t{1}, std::size_t{4}, rs - 1}) {
    std::istringstream in(full.substr(0, full.size() - cut));
    StreamReader reader(in);
    EmbeddingRecord r;
    for (int i = 0; i < 9; ++i) REQUIRE(reader.next(r));
    try {
      reader.next(r);
      FAIL("expected TruncationError");
    } catch (const TruncationError& e) {
      CHECK(e.offset() == h.encoded_size() + 9 * rs);
      CHECK(e.end_offset() == full.size() - cut);
    }
  }
}

TEST_CASE("bad magic, version and dtype are format errors") {
  std::ostringstream out;
  write_header(out, header_with_dim(2));
  const std::string good = out.str();

  auto expect_format = [](std::string bytes) {
    std::istringstream in(bytes);
    CHECK_THROWS_AS(StreamReader{in}, FormatError);
  };
  std::string s = good;
  s[0] = 'X';
  expect_format(s);
  s = good;
  s[4] = 2;  // version 2
  expect_format(s);
  s = good;
  s[16] = 1;  // dtype 1
  expect_format(s);
  s = good;
  s[8] = 0;  // dim 0
  expect_format(s);
  expect_format(good.substr(0, 10));
  expect_format("");
}

TEST_CASE("non-finite component on read is a data error with record index") {
  std::ostringstream out;
  StreamWriter w(out, header_with_dim(2));
  w.write(1, std::vector<float>{1, 2});
  w.write(1, std::vector<float>{3, 4});
  std::string bytes = out.str();
  // record 1, component 1: offset 19 + 12 + 4 + 4
  const std::uint32_t nan_bits = 0x7fc00000;
  std::memcpy(bytes.data() + 19 + 12 + 8, &nan_bits, 4);  // little-endian host
  std::istringstream in(bytes);
  StreamReader reader(in);
  EmbeddingRecord r;
  REQUIRE(reader.next(r));
  try {
    reader.next(r);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.record_index() == 1);
    CHECK(e.component() == 1);
  }
}

TEST_CASE("reader works on a non-seekable source") {
  std::mt19937_64 rng(11);
  const auto recs = oracle::random_records(rng, 50, 3, 5);
  std::ostringstream out;
  write_stream(header_with_dim(3), recs, out);
  PipeBuf buf(out.str());
  std::istream pipe(&buf);
  StreamReader reader(pipe);
  std::size_t i = 0;
  for (const auto& r : reader) {
    CHECK(r == recs[i]);
    ++i;
  }
  CHECK(i == recs.size());
  CHECK_THROWS_AS(reader.seek_record(0), InputError);
}

TEST_CASE("seek_record positions at the requested record") {
  std::mt19937_64 rng(5);
  const auto recs = oracle::random_records(rng, 20, 4, 5);
  std::stringstream io;
  write_stream(header_with_dim(4, "xy"), recs, io);
  StreamReader reader(io);
  reader.seek_record(13);
  EmbeddingRecord r;
  REQUIRE(reader.next(r));
  CHECK(r == recs[13]);
  CHECK(reader.position() == 14);
}

TEST_CASE("vocab sidecar parses and rejects duplicates") {
  std::istringstream in("7\tonce\t4\n8\twinked\t6\n\n9\t##ing\t5\n");
  const auto v = Vocab::read(in);
  CHECK(v.size() == 3);
  REQUIRE(v.find(8) != nullptr);
  CHECK(v.find(8)->token == "winked");
  CHECK(v.find(9)->char_count == 5);
  CHECK(v.find(10) == nullptr);

  std::ostringstream out;
  v.write(out);
  std::istringstream again(out.str());
  CHECK(Vocab::read(again).entries().size() == 3);

  std::istringstream dup("1\ta\t1\n1\tb\t1\n");
  CHECK_THROWS_AS(Vocab::read(dup), FormatError);
  std::istringstream fields("1\ta\n");
  CHECK_THROWS_AS(Vocab::read(fields), FormatError);
  std::istringstream num("x\ta\t1\n");
  CHECK_THROWS_AS(Vocab::read(num), FormatError);
}
