// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "synth/aggregate.h"
#include "synth/error.h"
#include "testing.h"

namespace synth {
namespace {

std::vector<Measurement> cont(std::initializer_list<double> vs) {
  std::vector<Measurement> out;
  for (double v : vs) out.push_back(Measurement::continuous(v));
  return out;
}

TEST(WeightedMean, Examples) {
  EXPECT_NEAR(weighted_mean(std::vector{0.2, 0.4, 0.6}, std::vector{1.0, 1.0, 1.0}), 0.4, 1e-12);
  EXPECT_NEAR(weighted_mean(std::vector{0.0, 1.0}, std::vector{3.0, 1.0}), 0.25, 1e-12);
  EXPECT_NEAR(weighted_mean(std::vector{0.7}, std::vector{5.0}), 0.7, 1e-12);
}

TEST(WeightedMean, Errors) {
  EXPECT_THROW(weighted_mean(std::vector<double>{}, std::vector<double>{}), DomainError);
  EXPECT_THROW(weighted_mean(std::vector{0.1, 0.2}, std::vector{0.0, 0.0}), DomainError);
  EXPECT_THROW(weighted_mean(std::vector{0.1}, std::vector{1.0, 1.0}), DomainError);
  EXPECT_THROW(weighted_mean(std::vector{0.1, 0.2}, std::vector{1.0, -1.0}), DomainError);
}

TEST(WeightedMean, ScaleInvariantAndBounded) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> m(1 + rng() % 8), w(m.size());
    for (auto& x : m) x = u(rng);
    for (auto& x : w) x = u(rng) + 0.01;
    const double base = weighted_mean(m, w);
    std::vector<double> w2 = w;
    for (auto& x : w2) x *= 17.5;
    EXPECT_NEAR(weighted_mean(m, w2), base, 1e-12);
    EXPECT_GE(base, *std::min_element(m.begin(), m.end()) - 1e-15);
    EXPECT_LE(base, *std::max_element(m.begin(), m.end()) + 1e-15);
  }
}

TEST(FractionPositive, Examples) {
  EXPECT_NEAR(fraction_positive(cont({0.8, 0.9, 0.2}), 0.5), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(fraction_positive(cont({0.9, 0.9}), 0.5), 1.0);
  EXPECT_EQ(fraction_positive(cont({0.5}), 0.5), 1.0);
  EXPECT_THROW(fraction_positive(std::vector<Measurement>{}, 0.5), DomainError);
}

TEST(FractionPositive, PermutationInvariant) {
  auto m = cont({0.1, 0.7, 0.5, 0.49, 0.93});
  const double base = fraction_positive(m, 0.5);
  std::sort(m.begin(), m.end(), [](auto& a, auto& b) { return a.value() < b.value(); });
  do {
    EXPECT_EQ(fraction_positive(m, 0.5), base);
  } while (std::next_permutation(m.begin(), m.end(), [](auto& a, auto& b) { return a.value() < b.value(); }));
}

TEST(MajorityVote, Examples) {
  using L = Label;
  EXPECT_EQ(majority_vote(std::vector{L::kSignificant, L::kSignificant, L::kNotSignificant}), L::kSignificant);
  EXPECT_EQ(majority_vote(std::vector{L::kSignificant, L::kNotSignificant}), L::kNotSignificant);
  EXPECT_EQ(majority_vote(std::vector{L::kNotSignificant}), L::kNotSignificant);
  EXPECT_THROW(majority_vote(std::vector<Label>{}), DomainError);
}

TEST(MetaAnalysis, TwoStudyExample) {
  const auto r = fixed_effects_meta_analysis(std::vector<Study>{{0.5, 0.1}, {0.3, 0.2}});
  EXPECT_NEAR(r.pooled_effect, 0.43333333333333335, 1e-12);
  EXPECT_NEAR(r.standard_error, 0.2581988897471611, 1e-12);
  EXPECT_NEAR(r.z_score, 1.6782927833565475, 1e-12);
  EXPECT_NEAR(r.p_value, 0.09328995618360458, 1e-4);
  EXPECT_NEAR(r.p_value, testing::quadrature_two_sided_p(r.z_score), 1e-9);
  EXPECT_FALSE(r.significant);
}

TEST(MetaAnalysis, SingleStudyExample) {
  const auto r = fixed_effects_meta_analysis(std::vector<Study>{{1.0, 0.25}});
  EXPECT_NEAR(r.pooled_effect, 1.0, 1e-12);
  EXPECT_NEAR(r.standard_error, 0.5, 1e-12);
  EXPECT_NEAR(r.z_score, 2.0, 1e-12);
  EXPECT_NEAR(r.p_value, 0.04550026389635839, 1e-4);
  EXPECT_TRUE(r.significant);
}

TEST(MetaAnalysis, ZeroEffects) {
  const auto r = fixed_effects_meta_analysis(std::vector<Study>{{0.0, 0.1}, {0.0, 0.3}});
  EXPECT_EQ(r.pooled_effect, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_FALSE(r.significant);
}

TEST(MetaAnalysis, Errors) {
  EXPECT_THROW(fixed_effects_meta_analysis(std::vector<Study>{}), DomainError);
  EXPECT_THROW(fixed_effects_meta_analysis(std::vector<Study>{{1.0, 0.0}}), DomainError);
  EXPECT_THROW(fixed_effects_meta_analysis(std::vector<Study>{{1.0, -1.0}}), DomainError);
}

TEST(MetaAnalysis, NormalTailAgreesWithQuadrature) {
  for (double z = 0.0; z <= 6.0; z += 0.125) {
    EXPECT_NEAR(two_sided_normal_p(z), testing::quadrature_two_sided_p(z), 1e-10) << z;
    EXPECT_EQ(two_sided_normal_p(z), two_sided_normal_p(-z));
  }
  EXPECT_GT(two_sided_normal_p(60.0), 0.0);  // clamped away from zero
}

TEST(MetaAnalysis, DuplicationEqualsHalfVariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> eff(-2.0, 2.0), var(0.01, 2.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<Study> dup, halved;
    const std::size_t n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) {
      const Study s{eff(rng), var(rng)};
      dup.push_back(s);
      dup.push_back(s);
      halved.push_back({s.effect, s.variance / 2.0});
    }
    const auto a = fixed_effects_meta_analysis(dup), b = fixed_effects_meta_analysis(halved);
    EXPECT_NEAR(a.pooled_effect, b.pooled_effect, 1e-12);
    EXPECT_NEAR(a.standard_error, b.standard_error, 1e-12);
  }
}

TEST(MetaAnalysis, PooledWithinRangeAndSignificanceMatchesP) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> eff(-2.0, 2.0), var(0.01, 2.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<Study> s(1 + rng() % 8);
    for (auto& x : s) x = {eff(rng), var(rng)};
    const auto r = fixed_effects_meta_analysis(s);
    double lo = s[0].effect, hi = s[0].effect, sw = 0.0;
    for (auto& x : s) {
      lo = std::min(lo, x.effect);
      hi = std::max(hi, x.effect);
      sw += 1.0 / x.variance;
    }
    EXPECT_GE(r.pooled_effect, lo - 1e-12);
    EXPECT_LE(r.pooled_effect, hi + 1e-12);
    EXPECT_NEAR(r.standard_error, 1.0 / std::sqrt(sw), 1e-12);
    EXPECT_EQ(r.significant, r.p_value < 0.05);
    EXPECT_GT(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

}  // namespace
}  // namespace synth
