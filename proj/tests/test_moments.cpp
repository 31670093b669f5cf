#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "embstats/error.hpp"
#include "embstats/moments.hpp"
#include "embstats/stream_format.hpp"
#include "oracles.hpp"

using namespace embstats;
using namespace embstats::moments;
using V = std::vector<double>;

namespace {

TokenTable table_of(const std::vector<stream::EmbeddingRecord>& recs) {
  TokenTable t;
  for (const auto& r : recs) accumulate(t, r.token_id, r.vector);
  return t;
}

void check_against_oracle(const TokenTable& table,
                          const std::vector<stream::EmbeddingRecord>& recs, double tol) {
  const auto ref = oracle::two_pass_per_token(recs);
  REQUIRE(ref.size() == table.size());
  for (const auto& s : finalize_all(table, false)) {
    const auto& o = ref.at(s.token_id);
    CHECK(s.n == o.n);
    CHECK(oracle::rel_close(s.Q, static_cast<double>(o.Q), tol));
    CHECK(oracle::rel_close(s.M, static_cast<double>(o.M), tol));
    CHECK(oracle::rel_close(s.V, static_cast<double>(o.V), tol));
  }
}

}  // namespace

TEST_CASE("accumulator_init") {
  auto a = accumulator_init(V{3, 4});
  CHECK(a.k == 1);
  CHECK(a.u == V{3, 4});
  CHECK(a.q == 25.0);

  auto z = accumulator_init(V{0, 0, 0});
  CHECK(z.k == 1);
  CHECK(z.u == V{0, 0, 0});
  CHECK(z.q == 0.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100, 100);
  V x(16);
  for (auto& v : x) v = u(rng);
  long double brute = 0;
  for (double v : x) brute += static_cast<long double>(v) * v;
  CHECK(oracle::rel_close(accumulator_init(x).q, static_cast<double>(brute), 1e-12));

  CHECK_THROWS_AS(accumulator_init(V{1, std::numeric_limits<double>::quiet_NaN()}),
                  DataError);
  CHECK_THROWS_AS(accumulator_init(std::vector<float>{std::numeric_limits<float>::infinity()}),
                  DataError);
}

TEST_CASE("accumulator_update") {
  auto a = update(accumulator_init(V{1}), V{3});
  CHECK(a.k == 2);
  CHECK(a.u == V{2});
  CHECK(a.q == 5.0);

  CHECK_THROWS_AS(update(accumulator_init(V{1, 2}), V{1}), DimensionError);
  CHECK_THROWS_AS(update(accumulator_init(V{1}), V{std::nan("")}), DataError);
}

TEST_CASE("constant stream keeps u = x and q = |x|^2 exactly") {
  const std::vector<float> x{1.7f, -3.25f, 99.1f, 0.001f};
  auto acc = accumulator_init(x);
  const auto u0 = acc.u;
  const double q0 = acc.q;
  for (int n = 2; n <= 5000; ++n) {
    acc = update(std::move(acc), x);
    REQUIRE(acc.u == u0);
    REQUIRE(acc.q == q0);
  }
  const auto s = finalize(acc, 0, false);
  CHECK(s.V == 0.0);
  CHECK(s.M == s.Q);
}

TEST_CASE("updating with duplicates of the mean matches the two-pass oracle") {
  std::vector<stream::EmbeddingRecord> recs{{0, {2.0f, -1.0f}}, {0, {4.0f, 3.0f}}};
  auto acc = accumulator_init(recs[0].vector);
  acc = update(std::move(acc), recs[1].vector);
  const std::vector<float> mean{3.0f, 1.0f};
  for (int i = 0; i < 50; ++i) {
    acc = update(std::move(acc), mean);
    recs.push_back({0, mean});
  }
  CHECK(acc.u[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(acc.u[1] == doctest::Approx(1.0).epsilon(1e-14));
  const auto o = oracle::two_pass_all(recs);
  CHECK(oracle::rel_close(acc.q, static_cast<double>(o.Q), 1e-12));
  const auto s = finalize(acc, 0, false);
  CHECK(oracle::rel_close(s.V, static_cast<double>(o.V), 1e-10));
}

TEST_CASE("merge") {
  const auto seq = update(accumulator_init(V{1}), V{3});
  const auto m = merge(accumulator_init(V{1}), accumulator_init(V{3}));
  CHECK(m.k == seq.k);
  CHECK(m.u == seq.u);
  CHECK(m.q == seq.q);

  auto a = update(update(accumulator_init(V{1, 5}), V{2, -7}), V{0.5, 0.25});
  const auto aa = merge(a, a);
  CHECK(aa.k == 2 * a.k);
  CHECK(aa.u == a.u);
  CHECK(aa.q == a.q);

  CHECK_THROWS_AS(merge(accumulator_init(V{1}), accumulator_init(V{1, 2})), DimensionError);
}

TEST_CASE("random partition into 7 chunks merges to the sequential result") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-100, 100);
  std::vector<V> xs(1000, V(5));
  for (auto& x : xs)
    for (auto& v : x) v = u(rng);

  auto seq = accumulator_init(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) seq = update(std::move(seq), xs[i]);

  std::vector<std::size_t> cuts{0};
  for (int i = 0; i < 6; ++i) cuts.push_back(1 + rng() % 998);
  cuts.push_back(1000);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::optional<TokenAccumulator> merged;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    auto part = accumulator_init(xs[cuts[c]]);
    for (std::size_t i = cuts[c] + 1; i < cuts[c + 1]; ++i) part = update(std::move(part), xs[i]);
    merged = merged ? merge(std::move(*merged), part) : part;
  }
  CHECK(merged->k == 1000);
  for (std::size_t i = 0; i < 5; ++i) CHECK(oracle::rel_close(merged->u[i], seq.u[i], 1e-9));
  CHECK(oracle::rel_close(merged->q, seq.q, 1e-9));
}

TEST_CASE("merge is commutative and associative within tolerance") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto recs = oracle::random_records(rng, 30 + rng() % 300, 4, 1);
    const std::size_t c1 = 1 + rng() % (recs.size() / 3);
    const std::size_t c2 = c1 + 1 + rng() % (recs.size() / 3);
    auto part = [&](std::size_t lo, std::size_t hi) {
      auto a = accumulator_init(recs[lo].vector);
      for (std::size_t i = lo + 1; i < hi; ++i) a = update(std::move(a), recs[i].vector);
      return a;
    };
    const auto a = part(0, c1), b = part(c1, c2), c = part(c2, recs.size());
    const auto left = merge(merge(a, b), c);
    const auto right = merge(a, merge(b, c));
    const auto swapped = merge(c, merge(b, a));
    const auto seq = part(0, recs.size());
    for (const auto* r : {&left, &right, &swapped}) {
      CHECK(r->k == seq.k);
      CHECK(oracle::rel_close(r->q, seq.q, 1e-9));
      for (std::size_t i = 0; i < 4; ++i) CHECK(oracle::rel_close(r->u[i], seq.u[i], 1e-9));
    }
    const auto ab = merge(a, b), ba = merge(b, a);
    CHECK(oracle::rel_close(ab.q, ba.q, 1e-12));
  }
}

TEST_CASE("finalize reproduces printed per-token values") {
  // Q = 494.1 and M = 239.9 give V = 254.2; Q = 485.6 and M = 404.5 give 81.1.
  TokenAccumulator once{5022, {std::sqrt(239.9)}, 494.1};
  const auto s = finalize(once, 1, false);
  CHECK(s.M == doctest::Approx(239.9).epsilon(1e-12));
  CHECK(s.V == doctest::Approx(254.2).epsilon(1e-12));
  CHECK(s.M + s.V == doctest::Approx(494.1).epsilon(1e-15));

  TokenAccumulator winked{229, {std::sqrt(404.5)}, 485.6};
  CHECK(finalize(winked, 2, false).V == doctest::Approx(81.1).epsilon(1e-12));

  const auto single = finalize(accumulator_init(V{3, -4, 12}), 3, true);
  CHECK(single.V == 0.0);
  CHECK(single.Q == single.M);
  REQUIRE(single.mu.has_value());
  CHECK(*single.mu == V{3, -4, 12});
  CHECK_FALSE(finalize(accumulator_init(V{1}), 0, false).mu.has_value());
}

TEST_CASE("finalize clamps round-off and rejects real Jensen violations") {
  TokenAccumulator tiny{3, {10.0}, 100.0 * (1 - 1e-12)};
  const auto s = finalize(tiny, 0, false);
  CHECK(s.V == 0.0);
  CHECK(s.M == s.Q);

  TokenAccumulator broken{3, {10.0}, 90.0};
  CHECK_THROWS_AS(finalize(broken, 0, false), NumericError);
}

TEST_CASE("Q - (M + V) vanishes to the last ulp for every token") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto recs = oracle::random_records(rng, 2000, 1 + rng() % 32, 50);
    for (const auto& s : finalize_all(table_of(recs), false)) {
      CHECK(s.V >= 0.0);
      CHECK(s.M >= 0.0);
      CHECK(std::fabs(s.Q - (s.M + s.V)) <= std::numeric_limits<double>::epsilon() * s.Q);
      if (s.n == 1) CHECK(s.V == 0.0);
    }
  }
}

TEST_CASE("accumulate_stream") {
  const std::vector<stream::EmbeddingRecord> recs{{5, {1, 2}}, {9, {0, 1}}, {5, {3, 2}}};
  stream::StreamHeader h;
  h.dim = 2;
  std::stringstream io;
  stream::write_stream(h, recs, io);
  stream::StreamReader reader(io);
  const auto t = accumulate_stream(reader);
  CHECK(t.size() == 2);
  CHECK(t.at(5).k == 2);
  CHECK(t.at(9).k == 1);

  std::mt19937_64 rng(77);
  const auto big = oracle::random_records(rng, 10'000, 8, 100);
  std::stringstream io2;
  h.dim = 8;
  stream::write_stream(h, big, io2);
  stream::StreamReader r2(io2);
  const auto t2 = accumulate_stream(r2);
  std::uint64_t total = 0;
  for (const auto& [id, a] : t2) total += a.k;
  CHECK(total == big.size());
  check_against_oracle(t2, big, 1e-9);
}

TEST_CASE("accumulate_stream propagates reader errors with the record index") {
  stream::StreamHeader h;
  h.dim = 1;
  std::ostringstream out;
  stream::StreamWriter w(out, h);
  for (int i = 0; i < 5; ++i) w.write(0, std::vector<float>{1.0f});
  std::string bytes = out.str();
  const std::uint32_t inf_bits = 0x7f800000;
  std::memcpy(bytes.data() + 19 + 3 * 8 + 4, &inf_bits, 4);
  std::istringstream in(bytes);
  stream::StreamReader reader(in);
  try {
    accumulate_stream(reader);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.record_index() == 3);
  }
}

TEST_CASE("streaming statistics match the two-pass oracle on long streams") {
  std::mt19937_64 rng(12345);
  const auto recs = oracle::random_records(rng, 100'000, 4, 3);
  check_against_oracle(table_of(recs), recs, 1e-9);
}

TEST_CASE("permutation invariance") {
  std::mt19937_64 rng(8);
  auto recs = oracle::random_records(rng, 5000, 6, 40);
  const auto a = finalize_all(table_of(recs), false);
  std::shuffle(recs.begin(), recs.end(), rng);
  const auto b = finalize_all(table_of(recs), false);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].n == b[i].n);
    CHECK(oracle::rel_close(a[i].Q, b[i].Q, 1e-9));
    CHECK(oracle::rel_close(a[i].M, b[i].M, 1e-9));
    CHECK(oracle::rel_close(a[i].V, b[i].V, 1e-9));
  }
}

TEST_CASE("Jensen holds throughout accumulation") {
  std::mt19937_64 rng(31);
  const auto recs = oracle::random_records(rng, 3000, 3, 1);
  auto acc = accumulator_init(recs[0].vector);
  for (std::size_t i = 1; i < recs.size(); ++i) {
    acc = update(std::move(acc), recs[i].vector);
    double m = 0;
    for (double v : acc.u) m += v * v;
    REQUIRE(acc.q >= m - kJensenSlack * acc.q);
  }
}

TEST_CASE("aggregate_global") {
  SUBCASE("single token is one cluster") {
    const auto t = table_of({{1, {1, 2}}, {1, {3, 0}}, {1, {-1, 1}}});
    const auto stats = finalize_all(t, true);
    const auto g = aggregate_global(stats);
    CHECK(g.n == 3);
    CHECK(g.V_B == doctest::Approx(0.0));
    CHECK(g.V_W == doctest::Approx(stats[0].V));
    CHECK(g.mu_X == *stats[0].mu);
  }
  SUBCASE("two single points {0} and {2}") {
    const auto stats = finalize_all(table_of({{1, {0}}, {2, {2}}}), true);
    const auto g = aggregate_global(stats);
    CHECK(g.mu_X == V{1});
    CHECK(g.Q_X == 2.0);
    CHECK(g.M_X == 1.0);
    CHECK(g.V_W == 0.0);
    CHECK(g.V_B == 1.0);
    CHECK(g.V_X == 1.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(aggregate_global({}), NumericError);
    const auto stats = finalize_all(table_of({{1, {0}}}), false);
    CHECK_THROWS_AS(aggregate_global(stats), InputError);
  }
}

TEST_CASE("decomposition and aggregation identities on random corpora") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng() % 20;
    const auto recs = oracle::random_records(rng, 100 + rng() % 3000, d,
                                             1 + static_cast<std::uint32_t>(rng() % 200));
    const auto stats = finalize_all(table_of(recs), true);
    const auto g = aggregate_global(stats);
    CHECK(std::fabs(g.V_X - (g.V_W + g.V_B)) <= 1e-9 * std::max(g.V_X, 1.0));
    CHECK(std::fabs(g.Q_X - (g.M_X + g.V_X)) <= 1e-12 * g.Q_X);

    const auto whole = oracle::two_pass_all(recs);
    CHECK(g.n == whole.n);
    CHECK(oracle::rel_close(g.Q_X, static_cast<double>(whole.Q), 1e-9));
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(std::fabs(g.mu_X[i] - static_cast<double>(whole.mean[i])) <=
            1e-9 * std::max(1.0, std::fabs(static_cast<double>(whole.mean[i]))));
    }
  }
}

TEST_CASE("merge_into combines tables") {
  std::mt19937_64 rng(17);
  const auto recs = oracle::random_records(rng, 4000, 3, 60);
  const std::vector<stream::EmbeddingRecord> a(recs.begin(), recs.begin() + 1500);
  const std::vector<stream::EmbeddingRecord> b(recs.begin() + 1500, recs.end());
  auto ta = table_of(a);
  merge_into(ta, table_of(b));
  check_against_oracle(ta, recs, 1e-9);
}
