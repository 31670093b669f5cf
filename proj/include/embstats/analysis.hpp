#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "embstats/moments.hpp"

namespace embstats::analysis {

inline constexpr double kDefaultLoLog10 = 1.0;
inline constexpr double kDefaultHiLog10 = 5.0;

// Keeps tokens with lo <= log10(n_t) <= hi, both ends inclusive.
std::vector<moments::TokenStats> frequency_filter(
    std::span<const moments::TokenStats> stats, double lo_log10, double hi_log10);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n_points = 0;
};

struct Point {
  double x;
  double y;
};

enum class FlatResponse { Error, Allow };

// Ordinary least squares with intercept. Throws NumericError for fewer than
// two points or constant x. A constant y leaves R^2 undefined: an error by
// default, or slope 0 with r2 = NaN under FlatResponse::Allow.
RegressionResult ols_fit(std::span<const Point> points,
                         FlatResponse flat = FlatResponse::Error);

// V regressed on M, raw values.
RegressionResult mv_regression(std::span<const moments::TokenStats> stats);

enum class FreqScale { Log1p, Raw };

struct FreqRegressions {
  RegressionResult Q;
  RegressionResult M;
  RegressionResult V;
};

// Each of Q, M, V against log10(n_t). Log1p fits log10(1 + value); Raw fits
// the values themselves. A constant response yields slope 0 and r2 = NaN.
FreqRegressions freq_regressions(std::span<const moments::TokenStats> stats,
                                 FreqScale scale = FreqScale::Log1p);

// Population standard deviation over mean. Throws on empty input or zero mean.
double coefficient_of_variation(std::span<const double> values);

struct LayerInput {
  std::uint32_t layer = 0;
  std::vector<moments::TokenStats> stats;        // all tokens of the layer
  std::optional<moments::GlobalStats> global;    // absent without mean vectors
};

struct LayerReportRow {
  std::uint32_t layer = 0;
  std::size_t n_tokens = 0;           // before filtering
  std::size_t n_filtered = 0;

  std::optional<moments::GlobalStats> global;
  // Q-normalised shares and the within share of V(X); absent without global
  // stats (and V_W/V_X also when V(X) is zero).
  std::optional<double> m_over_q;
  std::optional<double> vw_over_q;
  std::optional<double> vb_over_q;
  std::optional<double> vw_over_v;

  // Computed on the frequency-filtered tokens.
  std::optional<double> cv_q;
  std::optional<RegressionResult> mv;

  // Non-empty when something could not be computed, e.g. "empty filtered set".
  std::vector<std::string> flags;
};

// Shares of Q(X) and the within share of V(X) from global stats.
void fill_ratios(LayerReportRow& row, const moments::GlobalStats& g);

std::vector<LayerReportRow> layer_report(std::span<const LayerInput> layers,
                                         double lo_log10 = kDefaultLoLog10,
                                         double hi_log10 = kDefaultHiLog10);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::uint64_t> counts;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};

// Fixed-width bins over [min, max]; the maximum lands in the last bin.
Histogram histogram(std::span<const double> values, std::size_t bins = 50);

struct SampleCandidate {
  std::uint32_t token_id = 0;
  std::uint64_t n = 0;
  std::uint32_t char_count = 0;
};

// Candidates that pass the frequency filter and have at least `min_chars`
// characters.
std::vector<SampleCandidate> eligible_candidates(
    std::span<const SampleCandidate> all, double lo_log10 = kDefaultLoLog10,
    double hi_log10 = kDefaultHiLog10, std::uint32_t min_chars = 3);

// Splits [min log10 n, max log10 n] into `bins` equal sub-intervals and draws
// N_r = 2 + floor(sqrt(4 |T_r| / max_r |T_r|)) tokens uniformly without
// replacement from each, or all of them if the bin holds fewer. Result is
// sorted by bin, then by draw order; deterministic in (candidates, seed).
std::vector<std::uint32_t> sample_tokens(std::span<const SampleCandidate> candidates,
                                         std::uint64_t seed, std::size_t bins = 10);

// N_r from the bin size and the largest bin size, in exact integer arithmetic.
std::size_t tokens_per_bin(std::size_t bin_size, std::size_t max_bin_size);

}  // namespace embstats::analysis
