#include "embstats/stats_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <string_view>

#include <fmt/format.h>

#include "embstats/error.hpp"

namespace embstats::io {
namespace {

constexpr std::string_view kHeader = "token_id\ttoken\tn_t\tQ\tM\tV";

// f32 storage of mu perturbs |mu|^2 by ~1e-7 relative.
constexpr double kF32Slack = 1e-6;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw FormatError(fmt::format("stats line {}: cannot parse '{}'", line_no, field));
  }
  return value;
}

}  // namespace

void write_stats_tsv(std::ostream& sink, const std::vector<moments::TokenStats>& stats,
                     const stream::Vocab* vocab) {
  sink << kHeader << '\n';
  for (const auto& s : stats) {
    std::string_view token;
    if (vocab) {
      const auto* e = vocab->find(s.token_id);
      if (!e) throw InputError(fmt::format("vocab does not cover token_id {}", s.token_id));
      token = e->token;
    }
    sink << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", s.token_id, token, s.n, s.Q, s.M, s.V);
  }
}

StatsTable read_stats_tsv(std::istream& source) {
  StatsTable table;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(source, line) || line != kHeader) {
    throw FormatError("stats file does not start with the expected TSV header");
  }
  ++line_no;
  while (std::getline(source, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 6) {
      throw FormatError(fmt::format("stats line {}: expected 6 fields, got {}",
                                    line_no, f.size()));
    }
    moments::TokenStats s;
    s.token_id = parse_number<std::uint32_t>(f[0], line_no);
    s.n = parse_number<std::uint64_t>(f[2], line_no);
    s.Q = parse_number<double>(f[3], line_no);
    s.M = parse_number<double>(f[4], line_no);
    s.V = parse_number<double>(f[5], line_no);
    if (s.n == 0) throw FormatError(fmt::format("stats line {}: n_t is zero", line_no));
    table.stats.push_back(std::move(s));
    table.tokens.emplace_back(f[1]);
  }
  return table;
}

void write_mu_matrix(std::ostream& sink, stream::StreamHeader header,
                     const std::vector<moments::TokenStats>& stats) {
  if (stats.empty() || !stats.front().mu) {
    throw InputError("mu matrix export needs retained mean vectors");
  }
  header.dim = static_cast<std::uint32_t>(stats.front().mu->size());
  stream::StreamWriter writer(sink, header);
  std::vector<float> row(header.dim);
  for (const auto& s : stats) {
    if (!s.mu) throw InputError(fmt::format("token {} has no mean vector", s.token_id));
    if (s.mu->size() != header.dim) {
      throw DimensionError(writer.count(), header.dim, s.mu->size());
    }
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>((*s.mu)[i]);
    writer.write(s.token_id, row);
  }
}

stream::StreamHeader attach_mu(StatsTable& table, std::istream& mu_source) {
  stream::StreamReader reader(mu_source);
  stream::EmbeddingRecord r;
  std::size_t row = 0;
  while (reader.next(r)) {
    if (row >= table.stats.size()) {
      throw InputError("mu matrix has more rows than the stats table");
    }
    auto& s = table.stats[row];
    if (r.token_id != s.token_id) {
      throw InputError(fmt::format("mu row {} is token {}, stats row is token {}",
                                   row, r.token_id, s.token_id));
    }
    s.mu.emplace(r.vector.begin(), r.vector.end());
    ++row;
  }
  if (row != table.stats.size()) {
    throw InputError(fmt::format("mu matrix has {} rows, stats table has {}", row,
                                 table.stats.size()));
  }
  return reader.header();
}

moments::TokenStats reconcile_with_mu(moments::TokenStats s) {
  if (!s.mu) return s;
  s.M = moments::squared_norm(*s.mu);
  s.V = s.Q - s.M;
  if (s.V < 0.0) {
    if (-s.V > kF32Slack * s.Q) {
      throw NumericError(fmt::format(
          "token {}: stored mean has squared norm {} above Q {}", s.token_id, s.M, s.Q));
    }
    s.M = s.Q;
    s.V = 0.0;
  }
  return s;
}

}  // namespace embstats::io
