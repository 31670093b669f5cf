#pragma once

// Export/import of finalized per-token statistics.
//
// stats TSV: header line, then one row per token:
//   token_id <TAB> token <TAB> n_t <TAB> Q <TAB> M <TAB> V
// Numbers are printed in shortest round-trip form, so a reload reproduces the
// doubles exactly.
//
// mu matrix: a regular stream file (same header and record layout) holding
// one record per token, token_id then the mean vector as f32, in TSV row
// order.

#include <iosfwd>
#include <string>
#include <vector>

#include "embstats/moments.hpp"
#include "embstats/stream_format.hpp"
#include "embstats/vocab.hpp"

namespace embstats::io {

struct StatsTable {
  std::vector<moments::TokenStats> stats;
  std::vector<std::string> tokens;  // parallel to stats; empty if unknown
};

// Token strings come from `vocab` when given; a token missing from the vocab
// is an InputError.
void write_stats_tsv(std::ostream& sink, const std::vector<moments::TokenStats>& stats,
                     const stream::Vocab* vocab);
StatsTable read_stats_tsv(std::istream& source);

// `header` supplies layer and model tag; dim is taken from the mu vectors.
void write_mu_matrix(std::ostream& sink, stream::StreamHeader header,
                     const std::vector<moments::TokenStats>& stats);

// Attaches mean vectors to `table` reading a mu matrix. Row order and
// token ids must match the table. Returns the matrix header.
stream::StreamHeader attach_mu(StatsTable& table, std::istream& mu_source);

// Rebuilds M and V of a stats entry from its (f32-rounded) mean vector so
// that M = |mu|^2 holds for the stored mu. Needed before aggregation of
// reloaded stats; otherwise the f32 rounding of mu leaks into V_W + V_B.
moments::TokenStats reconcile_with_mu(moments::TokenStats s);

}  // namespace embstats::io
