/* Copyright 2026 The bcastle Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bcastle/oracles.hpp"
#include "bcastle/rng.hpp"
#include "bcastle/stats.hpp"

using namespace bcastle;

namespace {

std::vector<double> draws(std::size_t n, std::uint64_t seed, double (*f)(Stream&)) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    Stream s(seed, i);
    v[i] = f(s);
  }
  return v;
}

double unif(Stream& s) { return s.uniform(); }
double gauss(Stream& s) { return s.normal(); }
double cauchy(Stream& s) { return cauchy_quantile(1.0, s.uniform()); }

}  // namespace

TEST(KS, SampleAgainstItself) {
  auto x = draws(1000, 1, gauss);
  EXPECT_EQ(ks_two_sample(x, x).stat, 0.0);
}

TEST(KS, UniformCalibration) {
  auto x = draws(10000, 2, unif);
  auto r = ks_one_sample(x, [](double u) { return std::clamp(u, 0.0, 1.0); });
  EXPECT_LT(r.stat, 0.02);
  EXPECT_FALSE(r.flagged);
}

TEST(KS, ShiftedGaussiansFrozenGap) {
  // sup |Phi(x) - Phi(x - 1)| = 2 Phi(1/2) - 1
  double gap = std::erf(0.5 / std::sqrt(2.0));
  EXPECT_NEAR(gap, 0.3829249225480262, 1e-12);
  auto a = draws(20000, 3, gauss), b = draws(20000, 4, gauss);
  for (auto& v : b) v += 1;
  EXPECT_NEAR(ks_two_sample(a, b).stat, gap, 0.02);
}

TEST(KS, FewSamplesFlagged) {
  EXPECT_TRUE(ks_one_sample({0.1, 0.2}, [](double u) { return u; }).flagged);
  EXPECT_TRUE(ks_two_sample({0.1}, {0.2}).flagged);
}

TEST(KS, PValueLimits) {
  EXPECT_NEAR(kolmogorov_pvalue(0.0), 1.0, 1e-12);
  EXPECT_NEAR(kolmogorov_pvalue(1.3581), 0.05, 1e-3);
}

TEST(PairwiseSum, ExactOnSmallIntegers) {
  std::vector<double> v(1001);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  EXPECT_EQ(pairwise_sum(v.data(), v.size()), 500500.0);
}

TEST(CauchyFit, UnitScaleWithinInterval) {
  auto x = draws(20000, 5, cauchy);
  auto f = cauchy_scale_fit(x, 1);
  EXPECT_LE(f.ci_lo, 1.0);
  EXPECT_GE(f.ci_hi, 1.0);
  EXPECT_FALSE(f.tail_flag);
}

TEST(CauchyFit, ScaleEquivariantAndLocationInvariant) {
  auto x = draws(5000, 6, cauchy);
  auto y = x;
  for (auto& v : y) v = 2 * v + 7;
  auto fx = cauchy_scale_fit(x, 1, 0), fy = cauchy_scale_fit(y, 1, 0);
  EXPECT_NEAR(fy.scale, 2 * fx.scale, 1e-12);
  EXPECT_NEAR(fy.location, 2 * fx.location + 7, 1e-12);
}

TEST(CauchyFit, GaussianFlaggedByTail) {
  auto x = draws(20000, 7, gauss);
  EXPECT_TRUE(cauchy_scale_fit(x, 1, 0).tail_flag);
}

TEST(CharFn, ConstantZero) {
  for (const auto& p : empirical_charfn(std::vector<double>(100, 0.0), {0.0, 1.0, 5.0})) {
    EXPECT_EQ(p.re, 1.0);
    EXPECT_EQ(p.im, 0.0);
  }
}

TEST(CharFn, CauchyAtOne) {
  auto x = draws(20000, 8, cauchy);
  auto p = empirical_charfn(x, {1.0})[0];
  EXPECT_LE(std::abs(p.re - std::exp(-1.0)), 3 * p.se_re);
}

TEST(CharFn, SymmetricSampleHasNoImaginaryPart) {
  std::vector<double> x;
  for (int i = 1; i <= 50; ++i) {
    x.push_back(0.37 * i);
    x.push_back(-0.37 * i);
  }
  for (const auto& p : empirical_charfn(x, {0.5, 2.0})) EXPECT_NEAR(p.im, 0.0, 1e-15);
}

TEST(ExponentFit, ExactPowerLaw) {
  std::vector<double> s{1, 2, 4, 8, 16}, v;
  for (double x : s) v.push_back(std::pow(x, -0.5));
  EXPECT_NEAR(exponent_fit(s, v).slope, -0.5, 1e-12);
}

TEST(ExponentFit, NoisyPowerLawWithinInterval) {
  std::vector<double> s, v;
  for (int i = 0; i < 12; ++i) {
    Stream r(9, i);
    s.push_back(std::pow(2.0, i));
    v.push_back(3 * std::pow(s.back(), 0.75) * std::exp(0.05 * r.normal()));
  }
  auto f = exponent_fit(s, v);
  EXPECT_LE(f.ci_lo, 0.75);
  EXPECT_GE(f.ci_hi, 0.75);
}

TEST(ExponentFit, ConstantData) {
  EXPECT_NEAR(exponent_fit({1, 2, 4, 8}, {3, 3, 3, 3}).slope, 0.0, 1e-12);
}

TEST(ExponentFit, Rejects) {
  EXPECT_THROW(exponent_fit({1, 2, 4, 8}, {1, 0, 1, 1}), InputError);
  EXPECT_THROW(exponent_fit({1, 2, 3}, {1, 1, 1}), InputError);
  EXPECT_THROW(exponent_fit({1, 1.5, 2, 2.5}, {1, 1, 1, 1}), InputError);
}

TEST(Replicate, IndependentOfWorkerCount) {
  auto f = [](Stream& s, std::size_t) { return s.normal(); };
  auto a = replicate<double>(1000, 11, 1, f), b = replicate<double>(1000, 11, 4, f);
  EXPECT_EQ(a, b);
}

TEST(Report, JsonFields) {
  TestReport r{"x", 0.5, 1.0, true, 10, {3}, 0.1, {}};
  auto j = r.to_json();
  EXPECT_EQ(j["name"], "x");
  EXPECT_EQ(j["pass"], true);
  EXPECT_EQ(j["seeds"][0], 3);
}
