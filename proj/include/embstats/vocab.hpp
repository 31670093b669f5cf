#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace embstats::stream {

// One sidecar line: token_id <TAB> token <TAB> char_count.
struct VocabEntry {
  std::uint32_t token_id = 0;
  std::string token;
  std::uint32_t char_count = 0;
};

class Vocab {
 public:
  // Throws FormatError on duplicate ids or tokens containing tab/newline.
  void add(VocabEntry entry);

  const VocabEntry* find(std::uint32_t token_id) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::uint32_t, VocabEntry>& entries() const noexcept {
    return entries_;
  }

  static Vocab read(std::istream& source);
  void write(std::ostream& sink) const;

 private:
  std::map<std::uint32_t, VocabEntry> entries_;
};

}  // namespace embstats::stream
