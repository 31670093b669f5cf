#include "embstats/vocab.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <string_view>

#include <fmt/format.h>

#include "embstats/error.hpp"

namespace embstats::stream {
namespace {

std::uint32_t parse_u32(std::string_view field, std::size_t line_no) {
  std::uint32_t value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end || field.empty()) {
    throw FormatError(fmt::format("vocab line {}: '{}' is not an unsigned integer",
                                  line_no, field));
  }
  return value;
}

}  // namespace

void Vocab::add(VocabEntry entry) {
  if (entry.token.find_first_of("\t\n") != std::string::npos) {
    throw FormatError(fmt::format("vocab token for id {} contains tab or newline",
                                  entry.token_id));
  }
  const auto id = entry.token_id;
  if (!entries_.emplace(id, std::move(entry)).second) {
    throw FormatError(fmt::format("duplicate token_id {} in vocab", id));
  }
}

const VocabEntry* Vocab::find(std::uint32_t token_id) const {
  auto it = entries_.find(token_id);
  return it == entries_.end() ? nullptr : &it->second;
}

Vocab Vocab::read(std::istream& source) {
  Vocab vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw FormatError(fmt::format("vocab line {}: expected 3 tab-separated fields",
                                    line_no));
    }
    const std::string_view view(line);
    VocabEntry e;
    e.token_id = parse_u32(view.substr(0, t1), line_no);
    e.token = line.substr(t1 + 1, t2 - t1 - 1);
    e.char_count = parse_u32(view.substr(t2 + 1), line_no);
    vocab.add(std::move(e));
  }
  return vocab;
}

void Vocab::write(std::ostream& sink) const {
  for (const auto& [id, e] : entries_) {
    sink << id << '\t' << e.token << '\t' << e.char_count << '\n';
  }
}

}  // namespace embstats::stream
