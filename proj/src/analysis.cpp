#include "embstats/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "embstats/error.hpp"

namespace embstats::analysis {
namespace {

// log10 of an integer is never closer than ~4e-7 to an integral bound within
// the count range we handle, so this only absorbs libm rounding.
constexpr double kLogSlack = 1e-12;

bool in_log_range(std::uint64_t n, double lo, double hi) {
  if (n == 0) return false;
  const double lg = std::log10(static_cast<double>(n));
  return lg >= lo - kLogSlack && lg <= hi + kLogSlack;
}

template <typename F>
std::vector<Point> points_of(std::span<const moments::TokenStats> stats, F f) {
  std::vector<Point> pts;
  pts.reserve(stats.size());
  for (const auto& s : stats) pts.push_back(f(s));
  return pts;
}

}  // namespace

std::vector<moments::TokenStats> frequency_filter(
    std::span<const moments::TokenStats> stats, double lo_log10, double hi_log10) {
  if (lo_log10 > hi_log10) {
    throw InputError(fmt::format("frequency filter lo {} > hi {}", lo_log10, hi_log10));
  }
  std::vector<moments::TokenStats> out;
  for (const auto& s : stats) {
    if (in_log_range(s.n, lo_log10, hi_log10)) out.push_back(s);
  }
  return out;
}

RegressionResult ols_fit(std::span<const Point> points, FlatResponse flat) {
  const std::size_t n = points.size();
  if (n < 2) throw NumericError(fmt::format("regression needs >= 2 points, got {}", n));

  const bool x_const = std::all_of(points.begin(), points.end(),
                                   [&](const Point& p) { return p.x == points[0].x; });
  if (x_const) throw NumericError("regression x values have zero variance");

  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  RegressionResult r;
  r.n_points = n;
  const bool y_const = std::all_of(points.begin(), points.end(),
                                   [&](const Point& p) { return p.y == points[0].y; });
  if (y_const) {
    if (flat == FlatResponse::Error) {
      throw NumericError("regression y values have zero variance; R^2 undefined");
    }
    r.slope = 0.0;
    r.intercept = points[0].y;
    r.r2 = std::numeric_limits<double>::quiet_NaN();
    return r;
  }

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : points) {
    const double dx = p.x - mx;
    const double dy = p.y - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw NumericError("regression x values have zero variance");
  if (syy == 0.0) throw NumericError("regression y values have zero variance");

  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double ss_res = 0.0;
  for (const auto& p : points) {
    const double e = p.y - (r.intercept + r.slope * p.x);
    ss_res += e * e;
  }
  r.r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return r;
}

RegressionResult mv_regression(std::span<const moments::TokenStats> stats) {
  const auto pts = points_of(stats, [](const auto& s) { return Point{s.M, s.V}; });
  return ols_fit(pts);
}

FreqRegressions freq_regressions(std::span<const moments::TokenStats> stats,
                                 FreqScale scale) {
  if (stats.empty()) throw NumericError("frequency regression on empty token set");
  const auto y = [scale](double v) {
    return scale == FreqScale::Log1p ? std::log10(1.0 + v) : v;
  };
  const auto x = [](const moments::TokenStats& s) {
    return std::log10(static_cast<double>(s.n));
  };
  FreqRegressions out;
  out.Q = ols_fit(points_of(stats, [&](const auto& s) { return Point{x(s), y(s.Q)}; }),
                  FlatResponse::Allow);
  out.M = ols_fit(points_of(stats, [&](const auto& s) { return Point{x(s), y(s.M)}; }),
                  FlatResponse::Allow);
  out.V = ols_fit(points_of(stats, [&](const auto& s) { return Point{x(s), y(s.V)}; }),
                  FlatResponse::Allow);
  return out;
}

double coefficient_of_variation(std::span<const double> values) {
  if (values.empty()) throw NumericError("coefficient of variation of empty set");
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
    if (values[0] == 0.0) throw NumericError("coefficient of variation with zero mean");
    return 0.0;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (mean == 0.0) throw NumericError("coefficient of variation with zero mean");
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size())) / mean;
}

void fill_ratios(LayerReportRow& row, const moments::GlobalStats& g) {
  row.global = g;
  if (g.Q_X > 0.0) {
    row.m_over_q = g.M_X / g.Q_X;
    row.vw_over_q = g.V_W / g.Q_X;
    row.vb_over_q = g.V_B / g.Q_X;
  } else {
    row.flags.emplace_back("Q(X) is zero");
  }
  if (g.V_X > 0.0) {
    row.vw_over_v = g.V_W / g.V_X;
  } else {
    row.flags.emplace_back("V(X) is zero");
  }
}

std::vector<LayerReportRow> layer_report(std::span<const LayerInput> layers,
                                         double lo_log10, double hi_log10) {
  std::vector<LayerReportRow> rows;
  rows.reserve(layers.size());
  for (const auto& in : layers) {
    LayerReportRow row;
    row.layer = in.layer;
    row.n_tokens = in.stats.size();
    if (in.global) {
      fill_ratios(row, *in.global);
    } else {
      row.flags.emplace_back("no mean vectors; decomposition skipped");
    }

    const auto filtered = frequency_filter(in.stats, lo_log10, hi_log10);
    row.n_filtered = filtered.size();
    if (filtered.empty()) {
      row.flags.emplace_back("empty filtered set");
      rows.push_back(std::move(row));
      continue;
    }
    std::vector<double> qs;
    qs.reserve(filtered.size());
    for (const auto& s : filtered) qs.push_back(s.Q);
    try {
      row.cv_q = coefficient_of_variation(qs);
    } catch (const NumericError& e) {
      row.flags.emplace_back(fmt::format("cv_Q: {}", e.what()));
    }
    try {
      row.mv = mv_regression(filtered);
    } catch (const NumericError& e) {
      row.flags.emplace_back(fmt::format("mv regression: {}", e.what()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Histogram histogram(std::span<const double> values, std::size_t bins) {
  if (values.empty()) throw NumericError("histogram of empty set");
  if (bins == 0) throw InputError("histogram needs at least one bin");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  Histogram h;
  h.lo = *mn;
  h.hi = *mx;
  h.counts.assign(bins, 0);
  const double width = h.hi - h.lo;
  for (double v : values) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>((v - h.lo) / width * static_cast<double>(bins));
      b = std::min(b, bins - 1);
    }
    ++h.counts[b];
  }
  return h;
}

std::vector<SampleCandidate> eligible_candidates(std::span<const SampleCandidate> all,
                                                 double lo_log10, double hi_log10,
                                                 std::uint32_t min_chars) {
  std::vector<SampleCandidate> out;
  for (const auto& c : all) {
    if (c.char_count >= min_chars && in_log_range(c.n, lo_log10, hi_log10)) {
      out.push_back(c);
    }
  }
  return out;
}

std::size_t tokens_per_bin(std::size_t bin_size, std::size_t max_bin_size) {
  if (max_bin_size == 0) return 2;
  // floor(sqrt(4a/b)) is the largest k with k^2 * b <= 4a; k <= 2 since a <= b.
  std::size_t k = 0;
  while ((k + 1) * (k + 1) * max_bin_size <= 4 * bin_size) ++k;
  return 2 + k;
}

std::vector<std::uint32_t> sample_tokens(std::span<const SampleCandidate> candidates,
                                         std::uint64_t seed, std::size_t bins) {
  if (candidates.empty()) throw InputError("no tokens eligible for sampling");
  if (bins == 0) throw InputError("sampling needs at least one bin");

  std::vector<SampleCandidate> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.token_id < b.token_id; });

  std::vector<double> lg(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    lg[i] = std::log10(static_cast<double>(std::max<std::uint64_t>(sorted[i].n, 1)));
  }
  const auto [mn, mx] = std::minmax_element(lg.begin(), lg.end());
  const double lo = *mn;
  const double width = *mx - *mn;

  std::vector<std::vector<std::uint32_t>> members(bins);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>((lg[i] - lo) / width * static_cast<double>(bins));
      b = std::min(b, bins - 1);
    }
    members[b].push_back(sorted[i].token_id);
  }
  std::size_t largest = 0;
  for (const auto& m : members) largest = std::max(largest, m.size());

  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> picked;
  for (auto& m : members) {
    const std::size_t want = std::min(tokens_per_bin(m.size(), largest), m.size());
    // Partial Fisher-Yates: the first `want` slots become the draw.
    for (std::size_t i = 0; i < want; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, m.size() - 1);
      std::swap(m[i], m[pick(rng)]);
      picked.push_back(m[i]);
    }
  }
  return picked;
}

}  // namespace embstats::analysis
