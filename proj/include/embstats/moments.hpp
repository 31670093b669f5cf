#pragma once

// One-pass per-token moment accumulation and corpus-level aggregation.
//
// A TokenAccumulator holds the running state (k, u, q) for one token:
// k occurrences, u the running mean vector, q the running mean squared norm.
// Updates use the running-mean form u' = k/(k+1) u + 1/(k+1) x (evaluated as
// u + (x - u)/(k+1)) rather than sum-then-divide. All arithmetic is in
// double, whatever the input type.
//
// Finalized statistics per token:
//   Q = q            (mean squared norm)
//   M = |u|^2        (squared norm of the mean)
//   V = Q - M >= 0   (population total variance)
//
// Corpus-level statistics follow from the per-token ones with weights
// p_t = n_t / n, and V(X) splits into within-token V_W and between-token V_B.

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace embstats::stream {
class StreamReader;
}

namespace embstats::moments {

// Allowed negative slack of q - |u|^2, relative to q, before the state is
// considered corrupt rather than rounded.
inline constexpr double kJensenSlack = 1e-9;

struct TokenAccumulator {
  std::uint64_t k = 0;
  std::vector<double> u;
  double q = 0.0;

  std::size_t dim() const noexcept { return u.size(); }
};

TokenAccumulator accumulator_init(std::span<const double> x);
TokenAccumulator accumulator_init(std::span<const float> x);

// Pure state transitions. Pass the accumulator by move to avoid a copy:
//   acc = update(std::move(acc), x);
TokenAccumulator update(TokenAccumulator acc, std::span<const double> x);
TokenAccumulator update(TokenAccumulator acc, std::span<const float> x);
TokenAccumulator merge(TokenAccumulator a, const TokenAccumulator& b);

struct TokenStats {
  std::uint32_t token_id = 0;
  std::uint64_t n = 0;
  double Q = 0.0;
  double M = 0.0;
  double V = 0.0;
  std::optional<std::vector<double>> mu;
};

// Throws NumericError if q falls below |u|^2 by more than kJensenSlack * q.
// A smaller shortfall is treated as round-off: V = 0 and M = Q.
TokenStats finalize(const TokenAccumulator& acc, std::uint32_t token_id,
                    bool retain_mu);

using TokenTable = std::unordered_map<std::uint32_t, TokenAccumulator>;

void accumulate(TokenTable& table, std::uint32_t token_id,
                std::span<const float> x);

// Consumes records from the reader's current position until the end of the
// stream, or until `max_records` have been read.
TokenTable accumulate_stream(stream::StreamReader& reader,
                             std::uint64_t max_records = UINT64_MAX);

// Merges `from` into `into`; tokens present in both are combined.
void merge_into(TokenTable& into, const TokenTable& from);

// Sorted by token_id.
std::vector<TokenStats> finalize_all(const TokenTable& table, bool retain_mu);

struct GlobalStats {
  std::uint64_t n = 0;
  std::vector<double> mu_X;
  double Q_X = 0.0;
  double M_X = 0.0;
  double V_X = 0.0;
  double V_W = 0.0;
  double V_B = 0.0;
};

// Requires every entry to carry mu. Throws NumericError on empty input and
// InputError on missing mu or mismatched dimensions.
GlobalStats aggregate_global(std::span<const TokenStats> stats);

double squared_norm(std::span<const double> x) noexcept;

}  // namespace embstats::moments
