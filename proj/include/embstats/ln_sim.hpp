#pragma once

// Synthetic embeddings under the post-layer-norm model x = z * gamma + beta,
// with z drawn i.i.d. per component from a zero-mean, unit-variance law.
//
// Under this model Q(X_t) ~ |gamma|^2 + |beta|^2 with relative spread of
// order n_t^{-1/2}, so the coefficient of variation of Q across tokens
// scales as n0^{-1/2} with n0 the smallest frequency.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embstats/moments.hpp"

namespace embstats::stream {
class StreamWriter;
}

namespace embstats::lnsim {

enum class BaseDistribution {
  Normal,   // N(0, 1)
  Uniform,  // U(-sqrt 3, sqrt 3)
};

// Throws InputError for an unknown identifier ("normal", "uniform").
BaseDistribution parse_distribution(std::string_view id);
std::string_view to_string(BaseDistribution dist);

struct LnSimConfig {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<std::uint64_t> token_frequencies;  // n_t per token, token id = index
  BaseDistribution base = BaseDistribution::Normal;
  std::uint64_t seed = 0;

  std::size_t dim() const noexcept { return gamma.size(); }
};

// Throws InputError if gamma/beta are empty or of different length, or any
// frequency is zero.
void validate(const LnSimConfig& config);

// Per-token seed: splitmix64(seed ^ splitmix64(token_index)). Generation of a
// token depends only on this value, so tokens can be produced in any order
// or in parallel with identical output.
std::uint64_t token_seed(std::uint64_t seed, std::uint64_t token_index) noexcept;

using RecordSink =
    std::function<void(std::uint32_t token_id, std::span<const float> vector)>;

// Emits all records of token `token_index`.
void generate_token(const LnSimConfig& config, std::uint32_t token_index,
                    const RecordSink& sink);

// Emits the records of every token in token order.
void generate_ln_stream(const LnSimConfig& config, const RecordSink& sink);
void generate_ln_stream(const LnSimConfig& config, stream::StreamWriter& writer);

struct CvPoint {
  std::uint64_t n0 = 0;
  double cv_q = 0.0;
  double mean_q = 0.0;
};

struct CvStudy {
  std::vector<CvPoint> points;
  // Least-squares slope of log cv against log n0; NaN if any cv is zero.
  double loglog_slope = 0.0;
  double loglog_r2 = 0.0;
  // Mean of Q over every token of every grid point.
  double mean_q = 0.0;
  // |gamma|^2 + |beta|^2.
  double predicted_q = 0.0;
};

struct CvStudyParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<std::uint64_t> n0_grid;  // strictly increasing, >= 2 entries
  std::size_t tokens_per_point = 200;  // >= 50
  BaseDistribution base = BaseDistribution::Normal;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// For every n0, builds a corpus of tokens_per_point tokens each occurring n0
// times and takes the coefficient of variation of their Q values. Grid point
// i uses seed token_seed(seed, i) so points are independent.
CvStudy cv_scaling_study(const CvStudyParams& params);

}  // namespace embstats::lnsim
