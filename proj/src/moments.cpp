#include "embstats/moments.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "embstats/error.hpp"
#include "embstats/stream_format.hpp"

namespace embstats::moments {
namespace {

template <typename T>
void check_finite(std::span<const T> x, std::uint64_t index) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw DataError(index, i);
  }
}

template <typename T>
double squared_norm_of(std::span<const T> x) noexcept {
  double s = 0.0;
  for (const T v : x) {
    const double d = static_cast<double>(v);
    s += d * d;
  }
  return s;
}

template <typename T>
TokenAccumulator init_impl(std::span<const T> x) {
  check_finite(x, 0);
  TokenAccumulator acc;
  acc.k = 1;
  acc.u.assign(x.begin(), x.end());
  acc.q = squared_norm_of(x);
  return acc;
}

template <typename T>
TokenAccumulator update_impl(TokenAccumulator acc, std::span<const T> x) {
  if (x.size() != acc.dim()) throw DimensionError(acc.k, acc.dim(), x.size());
  check_finite(x, acc.k);
  // u + (x - u)/(k+1) equals k/(k+1) u + x/(k+1) and is exact when x == u.
  const double step = 1.0 / (static_cast<double>(acc.k) + 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc.u[i] += (static_cast<double>(x[i]) - acc.u[i]) * step;
  }
  acc.q += (squared_norm_of(x) - acc.q) * step;
  acc.k += 1;
  return acc;
}

}  // namespace

double squared_norm(std::span<const double> x) noexcept {
  return squared_norm_of(x);
}

TokenAccumulator accumulator_init(std::span<const double> x) { return init_impl(x); }
TokenAccumulator accumulator_init(std::span<const float> x) { return init_impl(x); }

TokenAccumulator update(TokenAccumulator acc, std::span<const double> x) {
  return update_impl(std::move(acc), x);
}
TokenAccumulator update(TokenAccumulator acc, std::span<const float> x) {
  return update_impl(std::move(acc), x);
}

TokenAccumulator merge(TokenAccumulator a, const TokenAccumulator& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError(fmt::format("cannot merge accumulators of dimension {} and {}",
                                     a.dim(), b.dim()));
  }
  const double wb = static_cast<double>(b.k) / static_cast<double>(a.k + b.k);
  for (std::size_t i = 0; i < a.u.size(); ++i) a.u[i] += (b.u[i] - a.u[i]) * wb;
  a.q += (b.q - a.q) * wb;
  a.k += b.k;
  return a;
}

TokenStats finalize(const TokenAccumulator& acc, std::uint32_t token_id,
                    bool retain_mu) {
  TokenStats s;
  s.token_id = token_id;
  s.n = acc.k;
  s.Q = acc.q;
  s.M = squared_norm(acc.u);
  s.V = s.Q - s.M;
  if (s.V < 0.0) {
    if (-s.V > kJensenSlack * s.Q) {
      throw NumericError(fmt::format(
          "token {}: mean squared norm {} below squared norm of mean {}",
          token_id, s.Q, s.M));
    }
    s.M = s.Q;
    s.V = 0.0;
  }
  if (retain_mu) s.mu = acc.u;
  return s;
}

void accumulate(TokenTable& table, std::uint32_t token_id,
                std::span<const float> x) {
  auto it = table.find(token_id);
  if (it == table.end()) {
    table.emplace(token_id, accumulator_init(x));
  } else {
    it->second = update(std::move(it->second), x);
  }
}

TokenTable accumulate_stream(stream::StreamReader& reader,
                             std::uint64_t max_records) {
  TokenTable table;
  stream::EmbeddingRecord record;
  for (std::uint64_t i = 0; i < max_records && reader.next(record); ++i) {
    accumulate(table, record.token_id, record.vector);
  }
  return table;
}

void merge_into(TokenTable& into, const TokenTable& from) {
  for (const auto& [id, acc] : from) {
    auto it = into.find(id);
    if (it == into.end()) {
      into.emplace(id, acc);
    } else {
      it->second = merge(std::move(it->second), acc);
    }
  }
}

std::vector<TokenStats> finalize_all(const TokenTable& table, bool retain_mu) {
  std::vector<TokenStats> out;
  out.reserve(table.size());
  for (const auto& [id, acc] : table) out.push_back(finalize(acc, id, retain_mu));
  std::sort(out.begin(), out.end(), [](const TokenStats& a, const TokenStats& b) {
    return a.token_id < b.token_id;
  });
  return out;
}

GlobalStats aggregate_global(std::span<const TokenStats> stats) {
  if (stats.empty()) throw NumericError("cannot aggregate an empty token set");
  GlobalStats g;
  std::size_t dim = 0;
  for (const auto& s : stats) {
    if (!s.mu) {
      throw InputError(fmt::format("token {} has no mean vector", s.token_id));
    }
    if (dim == 0) dim = s.mu->size();
    if (s.mu->size() != dim) {
      throw DimensionError(fmt::format("token {} mean has dimension {}, expected {}",
                                       s.token_id, s.mu->size(), dim));
    }
    g.n += s.n;
  }
  if (g.n == 0) throw NumericError("total occurrence count is zero");

  const double n = static_cast<double>(g.n);
  g.mu_X.assign(dim, 0.0);
  for (const auto& s : stats) {
    const double p = static_cast<double>(s.n) / n;
    for (std::size_t i = 0; i < dim; ++i) g.mu_X[i] += p * (*s.mu)[i];
    g.Q_X += p * s.Q;
    g.V_W += p * s.V;
  }
  for (const auto& s : stats) {
    const double p = static_cast<double>(s.n) / n;
    double dist = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double diff = (*s.mu)[i] - g.mu_X[i];
      dist += diff * diff;
    }
    g.V_B += p * dist;
  }
  g.M_X = squared_norm(g.mu_X);
  g.V_X = g.Q_X - g.M_X;
  if (g.V_X < 0.0) {
    if (-g.V_X > kJensenSlack * g.Q_X) {
      throw NumericError(fmt::format("corpus mean squared norm {} below M(X) {}",
                                     g.Q_X, g.M_X));
    }
    g.M_X = g.Q_X;
    g.V_X = 0.0;
  }
  return g;
}

}  // namespace embstats::moments
