#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "attnforge/attention.hpp"
#include "oracles.hpp"

using namespace attnforge;

TEST_CASE("validate_tensor accepts an exactly normalized slice") {
  AttentionTensor t({1, 1, 1, 2}, {0.5, 0.5});
  const auto r = validate_tensor(t, 1e-3);
  CHECK(r.valid);
  CHECK(r.violations.empty());
}

TEST_CASE("validate_tensor reports the violating slice and its sum") {
  AttentionTensor t({1, 1, 1, 2}, {0.5, 0.4});
  const auto r = validate_tensor(t, 1e-3);
  REQUIRE_FALSE(r.valid);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].step == 0);
  CHECK(r.violations[0].layer == 0);
  CHECK(r.violations[0].head == 0);
  CHECK(r.violations[0].sum == doctest::Approx(0.9));
}

TEST_CASE("a deviation equal to the tolerance is still valid") {
  // |0.99 - 1| is 0.01 up to rounding, which is not strictly above 1e-2.
  AttentionTensor t({2, 1, 1, 2}, {0.5, 0.5, 0.3, 0.69});
  CHECK(validate_tensor(t, 1e-2).valid);
  CHECK_FALSE(validate_tensor(t, 5e-3).valid);
}

TEST_CASE("negative entries are violations even when the slice sums to one") {
  AttentionTensor t({1, 1, 1, 3}, {1.2, -0.2, 0.0});
  const auto r = validate_tensor(t);
  REQUIRE_FALSE(r.valid);
  CHECK(r.violations[0].has_negative);
}

TEST_CASE("every violating slice is listed with its index") {
  AttentionTensor t({2, 2, 1, 2}, {0.5, 0.5, 0.2, 0.2, 0.5, 0.5, 0.9, 0.9});
  const auto r = validate_tensor(t);
  REQUIRE(r.violations.size() == 2);
  CHECK(r.violations[0].step == 0);
  CHECK(r.violations[0].layer == 1);
  CHECK(r.violations[1].step == 1);
  CHECK(r.violations[1].layer == 1);
  CHECK(r.violations[1].sum == doctest::Approx(1.8));
}

TEST_CASE("structural errors are distinct from normalization failures") {
  CHECK_THROWS_AS(AttentionTensor({1, 1, 1, 2}, {0.5}), StructuralError);
  CHECK_THROWS_AS(AttentionTensor({0, 1, 1, 2}, {}), StructuralError);
  CHECK_THROWS_AS(PrefillAttentionMatrix(2, {1.0, 0.0, 0.5}), StructuralError);
  CHECK_THROWS_AS(PrefillAttentionMatrix::from_rows({{1.0, 0.0}, {1.0}}), StructuralError);
  AttentionTensor t({1, 1, 1, 2}, {0.5, 0.5});
  CHECK_THROWS_AS(validate_tensor(t, 0.0), std::invalid_argument);
}

TEST_CASE("values are laid out in (t, l, h, i) order") {
  std::vector<double> v(2 * 3 * 2 * 2);
  std::iota(v.begin(), v.end(), 0.0);
  AttentionTensor t({2, 3, 2, 2}, v);
  CHECK(t.at(1, 2, 1, 1) == 23.0);
  CHECK(t.at(0, 1, 0, 1) == 5.0);
  CHECK(t.slice(1, 0, 1)[0] == 14.0);
}

TEST_CASE("aggregate_token_weights examples") {
  SUBCASE("single slice is the identity") {
    const auto w = aggregate_token_weights(AttentionTensor({1, 1, 1, 2}, {0.3, 0.7}));
    CHECK(w.weights[0] == doctest::Approx(0.3));
    CHECK(w.weights[1] == doctest::Approx(0.7));
  }
  SUBCASE("two steps average") {
    const auto w = aggregate_token_weights(AttentionTensor({2, 1, 1, 2}, {0.3, 0.7, 0.5, 0.5}));
    CHECK(w.weights[0] == doctest::Approx(0.4));
    CHECK(w.weights[1] == doctest::Approx(0.6));
  }
  SUBCASE("uniform tensor") {
    const auto w = aggregate_token_weights(AttentionTensor({3, 2, 2, 4}, std::vector<double>(48, 0.25)));
    for (double x : w.weights) CHECK(x == doctest::Approx(0.25));
  }
  SUBCASE("invalid tensor is rejected with its report") {
    try {
      aggregate_token_weights(AttentionTensor({1, 1, 1, 2}, {0.5, 0.4}));
      FAIL("expected InvalidTensorError");
    } catch (const InvalidTensorError& e) {
      CHECK(e.report().violations.size() == 1);
    }
  }
}

TEST_CASE("aggregate_token_weights is invariant to slice order") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto d = oracle::random_dims(rng, 4);
    auto nested = oracle::random_nested(rng, d);
    const auto base = aggregate_token_weights(oracle::to_tensor(nested)).weights;

    // Flatten the slices, shuffle them and rebuild with every slice on the step axis.
    std::vector<oracle::Slice> slices;
    for (auto& per_layer : nested)
      for (auto& per_head : per_layer)
        for (auto& s : per_head) slices.push_back(s);
    std::shuffle(slices.begin(), slices.end(), rng);
    std::vector<double> flat;
    for (auto& s : slices) flat.insert(flat.end(), s.begin(), s.end());
    const auto permuted =
        aggregate_token_weights(AttentionTensor({slices.size(), 1, 1, d.tokens}, flat)).weights;
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(permuted[i] == doctest::Approx(base[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("aggregated weights sum to one within T*L*H*tol") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto d = oracle::random_dims(rng, 4);
    const auto w = aggregate_token_weights(oracle::to_tensor(oracle::random_nested(rng, d))).weights;
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    CHECK(std::abs(sum - 1.0) <= static_cast<double>(d.slice_count()) * kDefaultNormTol);
  }
}

TEST_CASE("validation is pure") {
  AttentionTensor t({2, 1, 1, 2}, {0.5, 0.5, 0.3, 0.6});
  const auto a = validate_tensor(t);
  const auto b = validate_tensor(t);
  CHECK(a.valid == b.valid);
  REQUIRE(a.violations.size() == b.violations.size());
  CHECK(a.violations[0].sum == b.violations[0].sum);
}

TEST_CASE("validate_prefill checks causality, rows and signs") {
  CHECK(validate_prefill(PrefillAttentionMatrix::from_rows({{1, 0}, {0.5, 0.5}})).valid);
  const auto acausal = validate_prefill(PrefillAttentionMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}}));
  REQUIRE_FALSE(acausal.valid);
  CHECK(acausal.violations[0].row == 0);
  CHECK(acausal.violations[0].acausal);
  const auto unnormalized = validate_prefill(PrefillAttentionMatrix::from_rows({{1, 0}, {0.5, 0.3}}));
  REQUIRE_FALSE(unnormalized.valid);
  CHECK(unnormalized.violations[0].row == 1);
  CHECK_FALSE(unnormalized.violations[0].acausal);
}

TEST_CASE("validate_prompt") {
  TokenizedPrompt ok{"ab cd", {{"ab", 0, 2}, {"cd", 3, 5}}, {1}};
  CHECK_NOTHROW(validate_prompt(ok));
  auto overlapping = ok;
  overlapping.tokens[1].start = 1;
  CHECK_THROWS_AS(validate_prompt(overlapping), StructuralError);
  auto out_of_text = ok;
  out_of_text.tokens[1].end = 9;
  CHECK_THROWS_AS(validate_prompt(out_of_text), StructuralError);
  auto bad_index = ok;
  bad_index.sensitive_indices = {2};
  CHECK_THROWS_AS(validate_prompt(bad_index), StructuralError);
}
