#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "attnforge/metrics.hpp"
#include "oracles.hpp"

using namespace attnforge;

namespace {

AttentionTensor single(std::vector<double> v) {
  const auto m = v.size();
  return AttentionTensor({1, 1, 1, m}, std::move(v));
}

MetricConfig raw() {
  MetricConfig c;
  c.entropy_normalized = false;
  return c;
}

}  // namespace

TEST_CASE("attn_sens_words examples") {
  CHECK(attn_sens_words(single({0.1, 0.2, 0.3, 0.4}), {2, 3}) == doctest::Approx(0.175));
  CHECK(attn_sens_words(single({0.1, 0.2, 0.3, 0.4}), {}) == 0.0);
  const AttentionTensor uniform({2, 2, 2, 100}, std::vector<double>(800, 0.01));
  CHECK(attn_sens_words(uniform, {42}) == doctest::Approx(0.0001));
}

TEST_CASE("attn_sens_words errors") {
  CHECK_THROWS_AS(attn_sens_words(single({0.5, 0.5}), {2}), std::out_of_range);
  CHECK_THROWS_AS(attn_sens_words(single({0.5, 0.4}), {0}), InvalidTensorError);
}

TEST_CASE("attn_entropy examples") {
  CHECK(attn_entropy(single({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(1.0));
  CHECK(attn_entropy(single({1, 0, 0, 0})) == 0.0);
  CHECK(attn_entropy(single({0.5, 0.5, 0, 0})) == doctest::Approx(0.5));
  CHECK(attn_entropy(single({0.5, 0.5, 0, 0}), raw()) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("normalized entropy needs two tokens") {
  CHECK_THROWS_AS(attn_entropy(single({1.0})), std::domain_error);
  CHECK(attn_entropy(single({1.0}), raw()) == 0.0);
}

TEST_CASE("conditional_entropy examples") {
  CHECK(conditional_entropy(PrefillAttentionMatrix::from_rows({{1, 0}, {0, 1}})) == 0.0);
  CHECK(conditional_entropy(PrefillAttentionMatrix::from_rows({{1, 0}, {0.5, 0.5}})) ==
        doctest::Approx(0.6931).epsilon(1e-4));
  const double third = 1.0 / 3.0;
  CHECK(conditional_entropy(PrefillAttentionMatrix::from_rows(
            {{1, 0, 0}, {0.5, 0.5, 0}, {third, third, third}})) ==
        doctest::Approx(std::log(2.0) + std::log(3.0)));
  CHECK_THROWS_AS(conditional_entropy(PrefillAttentionMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}})),
                  InvalidPrefillError);
}

TEST_CASE("risk_score examples") {
  CHECK(risk_score(0.4, 0.6, 0) == doctest::Approx(0.4));
  CHECK(risk_score(0.4, 0.6, 2) == doctest::Approx(1.6));
  CHECK(risk_score(0.0, 0.0, 7.5) == 0.0);
  CHECK_THROWS_AS(risk_score(0.4, 0.6, -1), std::invalid_argument);
  CHECK_THROWS_AS(risk_score(NAN, 0.6, 1), std::invalid_argument);
}

TEST_CASE("metrics match brute-force oracles on random tensors") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const auto d = oracle::random_dims(rng, 4);
    const auto nested = oracle::random_nested(rng, d);
    const auto tensor = oracle::to_tensor(nested);
    const auto s = oracle::random_subset(rng, d.tokens);
    CHECK(oracle::close_rel(attn_sens_words(tensor, s), oracle::asw(nested, s), 1e-9));
    CHECK(oracle::close_rel(attn_entropy(tensor, raw()), oracle::entropy(nested, false), 1e-9));
    if (d.tokens >= 2) {
      CHECK(oracle::close_rel(attn_entropy(tensor), oracle::entropy(nested, true), 1e-9));
    }
    const auto rows = oracle::random_prefill_rows(rng, d.tokens);
    CHECK(oracle::close_rel(conditional_entropy(PrefillAttentionMatrix::from_rows(rows)),
                            oracle::conditional_entropy(rows), 1e-9));
  }
}

TEST_CASE("entropy bounds") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const auto d = oracle::random_dims(rng, 4, 2);
    const double e = attn_entropy(oracle::to_tensor(oracle::random_nested(rng, d)));
    CHECK(e >= 0.0);
    CHECK(e <= 1.0 + 1e-12);
  }
}

TEST_CASE("asw is additive over disjoint sensitive sets") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = oracle::random_dims(rng, 4);
    const auto tensor = oracle::to_tensor(oracle::random_nested(rng, d));
    std::set<std::size_t> a, b;
    for (std::size_t i = 0; i < d.tokens; ++i) {
      const auto r = rng() % 3;
      if (r == 0) a.insert(i);
      if (r == 1) b.insert(i);
    }
    std::set<std::size_t> both = a;
    both.insert(b.begin(), b.end());
    CHECK(attn_sens_words(tensor, both) ==
          doctest::Approx(attn_sens_words(tensor, a) + attn_sens_words(tensor, b)).epsilon(1e-12));
  }
}

TEST_CASE("permuting non-sensitive columns leaves asw unchanged") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = oracle::random_dims(rng, 4);
    auto nested = oracle::random_nested(rng, d);
    const auto s = oracle::random_subset(rng, d.tokens);
    const double before = attn_sens_words(oracle::to_tensor(nested), s);
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < d.tokens; ++i)
      if (!s.count(i)) free.push_back(i);
    auto shuffled = free;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (auto& per_layer : nested)
      for (auto& per_head : per_layer)
        for (auto& slice : per_head) {
          const auto copy = slice;
          for (std::size_t k = 0; k < free.size(); ++k) slice[shuffled[k]] = copy[free[k]];
        }
    CHECK(attn_sens_words(oracle::to_tensor(nested), s) == doctest::Approx(before).epsilon(1e-12));
  }
}

namespace {

// q is majorized by p: the descending partial sums of q never exceed p's.
bool majorized_by(std::vector<double> q, std::vector<double> p) {
  std::sort(q.rbegin(), q.rend());
  std::sort(p.rbegin(), p.rend());
  double sq = 0, sp = 0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    sq += q[k];
    sp += p[k];
    if (sq > sp + 1e-12) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("conditional entropy does not decrease when a row becomes more uniform") {
  // Every causal 3x3 instance with rows on a 0.1 grid.
  std::vector<std::vector<double>> row1, row2;
  for (int a = 0; a <= 10; ++a) row1.push_back({a / 10.0, (10 - a) / 10.0, 0.0});
  for (int a = 0; a <= 10; ++a)
    for (int b = 0; a + b <= 10; ++b) row2.push_back({a / 10.0, b / 10.0, (10 - a - b) / 10.0});
  const std::vector<double> row0{1, 0, 0};
  int compared = 0;
  for (const auto& r1 : row1) {
    for (const auto& p : row2) {
      const double hp = conditional_entropy(PrefillAttentionMatrix::from_rows({row0, r1, p}));
      for (const auto& q : row2) {
        if (q == p || !majorized_by(q, p)) continue;
        const double hq = conditional_entropy(PrefillAttentionMatrix::from_rows({row0, r1, q}));
        CHECK(hq >= hp - 1e-12);
        ++compared;
      }
    }
    for (const auto& q1 : row1) {
      if (q1 == r1 || !majorized_by(q1, r1)) continue;
      const std::vector<double> fixed{0.2, 0.3, 0.5};
      CHECK(conditional_entropy(PrefillAttentionMatrix::from_rows({row0, q1, fixed})) >=
            conditional_entropy(PrefillAttentionMatrix::from_rows({row0, r1, fixed})) - 1e-12);
    }
  }
  CHECK(compared > 1000);
}

TEST_CASE("risk_score is affine in beta") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> e(0, 1), h(0, 50), b(0, 10);
  for (int trial = 0; trial < 100; ++trial) {
    const double ent = e(rng), cond = h(rng), b1 = b(rng), b2 = b(rng);
    CHECK(risk_score(ent, cond, b2) - risk_score(ent, cond, b1) ==
          doctest::Approx((b2 - b1) * cond).epsilon(1e-12));
  }
}

TEST_CASE("full_report") {
  const TokenizedPrompt prompt{"a b c d", {{"a", 0, 1}, {"b", 2, 3}, {"c", 4, 5}, {"d", 6, 7}}, {1}};
  const AttentionTensor tensor({1, 1, 2, 4}, {0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25});
  const auto prefill = PrefillAttentionMatrix::from_rows(
      {{1, 0, 0, 0}, {0.5, 0.5, 0, 0}, {0.2, 0.3, 0.5, 0}, {0.25, 0.25, 0.25, 0.25}});
  MetricConfig config;

  SUBCASE("fields equal the individual operations") {
    const auto r = full_report(prompt, tensor, prefill, config, 1.5);
    CHECK(r.asw == attn_sens_words(tensor, {1}));
    CHECK(r.entropy == attn_entropy(prefill, config));
    CHECK(r.cond_entropy == conditional_entropy(prefill));
    CHECK(r.risk == doctest::Approx(r.entropy + 1.5 * r.cond_entropy));
    CHECK(r.source == EntropySource::Prefill);
  }
  SUBCASE("decode source uses the tensor slices") {
    config.entropy_source = EntropySource::Decode;
    CHECK(full_report(prompt, tensor, prefill, config, 0).entropy == attn_entropy(tensor, config));
  }
  SUBCASE("beta zero") {
    const auto r = full_report(prompt, tensor, prefill, config, 0);
    CHECK(r.risk == r.entropy);
  }
  SUBCASE("token count mismatch") {
    const auto bigger = PrefillAttentionMatrix::from_rows(
        {{1, 0, 0, 0, 0}, {1, 0, 0, 0, 0}, {1, 0, 0, 0, 0}, {1, 0, 0, 0, 0}, {1, 0, 0, 0, 0}});
    CHECK_THROWS_AS(full_report(prompt, tensor, bigger, config, 0), DimensionMismatch);
  }
  SUBCASE("json keeps its field order and round-trips") {
    const auto r = full_report(prompt, tensor, prefill, config, 2);
    const auto j = to_json(r);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"asw", "entropy", "cond_entropy", "risk", "beta",
                                           "normalized", "source"});
    const auto back = metric_report_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.asw == r.asw);
    CHECK(back.risk == r.risk);
    CHECK(back.source == r.source);
  }
}

TEST_CASE("report_from_stats agrees with full tensors") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = oracle::random_dims(rng, 4, 2);
    const auto nested = oracle::random_nested(rng, d);
    const auto tensor = oracle::to_tensor(nested);
    const auto s = oracle::random_subset(rng, d.tokens);
    const auto rows = oracle::random_prefill_rows(rng, d.tokens);
    AttentionStats stats;
    stats.dims = d;
    for (std::size_t k = 0; k < d.slice_count(); ++k) stats.entropy_sum += shannon_entropy(tensor.slice(k));
    for (std::size_t k = 0; k < d.slice_count(); ++k)
      for (auto i : s) stats.sens_mass_sum += tensor.slice(k)[i];
    stats.prefill_entropy = oracle::conditional_entropy(rows);
    MetricConfig config;
    const auto r = report_from_stats(stats, config, 0.5);
    CHECK(r.asw == doctest::Approx(attn_sens_words(tensor, s)).epsilon(1e-12));
    CHECK(r.entropy == doctest::Approx(attn_entropy(tensor)).epsilon(1e-12));
    CHECK(r.source == EntropySource::Decode);
  }
}
