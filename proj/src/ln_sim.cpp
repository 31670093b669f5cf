#include "embstats/ln_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "embstats/analysis.hpp"
#include "embstats/error.hpp"
#include "embstats/stream_format.hpp"

namespace embstats::lnsim {
namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class ZSampler {
 public:
  ZSampler(BaseDistribution base, std::uint64_t seed) : base_(base), rng_(seed) {}

  double operator()() {
    return base_ == BaseDistribution::Normal ? normal_(rng_) : uniform_(rng_);
  }

 private:
  BaseDistribution base_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{-std::sqrt(3.0), std::sqrt(3.0)};
};

}  // namespace

BaseDistribution parse_distribution(std::string_view id) {
  if (id == "normal") return BaseDistribution::Normal;
  if (id == "uniform") return BaseDistribution::Uniform;
  throw InputError(fmt::format("unknown base distribution '{}'", id));
}

std::string_view to_string(BaseDistribution dist) {
  return dist == BaseDistribution::Normal ? "normal" : "uniform";
}

void validate(const LnSimConfig& config) {
  if (config.gamma.empty()) throw InputError("gamma must have dimension >= 1");
  if (config.beta.size() != config.gamma.size()) {
    throw InputError(fmt::format("gamma has dimension {}, beta has {}",
                                 config.gamma.size(), config.beta.size()));
  }
  for (std::size_t t = 0; t < config.token_frequencies.size(); ++t) {
    if (config.token_frequencies[t] == 0) {
      throw InputError(fmt::format("token {} has frequency 0", t));
    }
  }
}

std::uint64_t token_seed(std::uint64_t seed, std::uint64_t token_index) noexcept {
  return splitmix64(seed ^ splitmix64(token_index));
}

void generate_token(const LnSimConfig& config, std::uint32_t token_index,
                    const RecordSink& sink) {
  ZSampler z(config.base, token_seed(config.seed, token_index));
  const std::size_t d = config.dim();
  std::vector<float> x(d);
  for (std::uint64_t occ = 0; occ < config.token_frequencies.at(token_index); ++occ) {
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = static_cast<float>(z() * config.gamma[i] + config.beta[i]);
    }
    sink(token_index, x);
  }
}

void generate_ln_stream(const LnSimConfig& config, const RecordSink& sink) {
  validate(config);
  for (std::size_t t = 0; t < config.token_frequencies.size(); ++t) {
    generate_token(config, static_cast<std::uint32_t>(t), sink);
  }
}

void generate_ln_stream(const LnSimConfig& config, stream::StreamWriter& writer) {
  if (writer.header().dim != config.dim()) {
    throw DimensionError(fmt::format("writer dim {} differs from config dim {}",
                                     writer.header().dim, config.dim()));
  }
  generate_ln_stream(config, [&writer](std::uint32_t id, std::span<const float> v) {
    writer.write(id, v);
  });
}

CvStudy cv_scaling_study(const CvStudyParams& params) {
  if (params.n0_grid.size() < 2) throw InputError("n0 grid needs >= 2 entries");
  for (std::size_t i = 0; i < params.n0_grid.size(); ++i) {
    if (params.n0_grid[i] == 0) throw InputError("n0 grid entries must be >= 1");
    if (i > 0 && params.n0_grid[i] <= params.n0_grid[i - 1]) {
      throw InputError("n0 grid must be strictly increasing");
    }
  }
  if (params.tokens_per_point < 50) throw InputError("tokens per point must be >= 50");

  CvStudy study;
  study.predicted_q = moments::squared_norm(params.gamma) + moments::squared_norm(params.beta);
  double q_sum = 0.0;
  std::size_t q_count = 0;
  const unsigned threads = std::max(1u, params.threads);

  for (std::size_t g = 0; g < params.n0_grid.size(); ++g) {
    LnSimConfig config;
    config.gamma = params.gamma;
    config.beta = params.beta;
    config.token_frequencies.assign(params.tokens_per_point, params.n0_grid[g]);
    config.base = params.base;
    config.seed = token_seed(params.seed, g);
    validate(config);

    std::vector<double> qs(params.tokens_per_point);
    auto work = [&](std::size_t first, std::size_t stride) {
      for (std::size_t t = first; t < qs.size(); t += stride) {
        moments::TokenAccumulator acc;
        generate_token(config, static_cast<std::uint32_t>(t),
                       [&acc](std::uint32_t, std::span<const float> v) {
                         acc = acc.k == 0 ? moments::accumulator_init(v)
                                          : moments::update(std::move(acc), v);
                       });
        qs[t] = moments::finalize(acc, static_cast<std::uint32_t>(t), false).Q;
      }
    };
    if (threads == 1) {
      work(0, 1);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    }

    CvPoint p;
    p.n0 = params.n0_grid[g];
    p.cv_q = analysis::coefficient_of_variation(qs);
    for (double q : qs) p.mean_q += q;
    q_sum += p.mean_q;
    q_count += qs.size();
    p.mean_q /= static_cast<double>(qs.size());
    study.points.push_back(p);
  }
  study.mean_q = q_sum / static_cast<double>(q_count);

  const bool any_zero = std::any_of(study.points.begin(), study.points.end(),
                                    [](const CvPoint& p) { return p.cv_q <= 0.0; });
  if (any_zero) {
    study.loglog_slope = std::numeric_limits<double>::quiet_NaN();
    study.loglog_r2 = std::numeric_limits<double>::quiet_NaN();
  } else {
    std::vector<analysis::Point> pts;
    for (const auto& p : study.points) {
      pts.push_back({std::log(static_cast<double>(p.n0)), std::log(p.cv_q)});
    }
    const auto fit = analysis::ols_fit(pts, analysis::FlatResponse::Allow);
    study.loglog_slope = fit.slope;
    study.loglog_r2 = fit.r2;
  }
  return study;
}

}  // namespace embstats::lnsim
