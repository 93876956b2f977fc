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

#include "bcastle/rtree.hpp"
#include "bcastle/stats.hpp"
#include "bcastle/tree_processes.hpp"

using namespace bcastle;

namespace {

// Root -- 1 -- branch, branches 1 and 2: tips at depth 2 and 3.
FiniteRTree deep_y() { return FiniteRTree({-1, 0, 1, 1}, {0, 1.0, 1.0, 2.0}); }

double cov(const std::vector<double>& a, const std::vector<double>& b, double* se = nullptr) {
  std::vector<double> p(a.size());
  auto ma = mean_se(a).mean, mb = mean_se(b).mean;
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = (a[i] - ma) * (b[i] - mb);
  auto m = mean_se(p);
  if (se) *se = m.se;
  return m.mean;
}

}  // namespace

TEST(BrownianOnTree, RootIsZero) {
  auto t = deep_y();
  Stream r(1, 0);
  auto B = sample_brownian_on_tree(t, 0.1, r);
  EXPECT_EQ(B.value(t.node(t.root())), 0.0);
}

TEST(BrownianOnTree, SingleEdgeVariance) {
  auto t = FiniteRTree::path(2.5);
  const int N = 20000;
  std::vector<double> v(N);
  for (int i = 0; i < N; ++i) {
    Stream r(2, i);
    v[i] = sample_brownian_on_tree(t, 0.5, r).value(t.node(1));
  }
  double se;
  double c = cov(v, v, &se);
  EXPECT_LE(std::abs(c - 2.5), 3 * se);
}

TEST(BrownianOnTree, TipCovarianceIsBranchDepth) {
  auto t = deep_y();
  const int N = 20000;
  std::vector<double> a(N), b(N);
  for (int i = 0; i < N; ++i) {
    Stream r(3, i);
    auto B = sample_brownian_on_tree(t, 0.25, r);
    a[i] = B.value(t.node(2));
    b[i] = B.value(t.node(3));
  }
  double se;
  double c = cov(a, b, &se);
  EXPECT_LE(std::abs(c - 1.0), 3 * se);
}

TEST(BrownianOnTree, InterpolatesBetweenKnots) {
  auto t = FiniteRTree::path(1.0);
  Stream r(4, 0);
  auto B = sample_brownian_on_tree(t, 0.5, r);
  double mid = 0.5 * (B.value({1, 0.5}) + B.value({1, 0.0}));
  EXPECT_NEAR(B.value({1, 0.25}), mid, 1e-12);
  EXPECT_THROW(sample_brownian_on_tree(t, 0.0, r), InputError);
}

TEST(SegmentOverlap, DisjointIsZero) {
  auto t = deep_y();
  EXPECT_EQ(segment_overlap_length(t, t.node(2), {2, 0.5}, t.node(3), {3, 1.0}), 0.0);
}

TEST(SegmentOverlap, IdenticalSegmentIsItsLength) {
  auto t = deep_y();
  EXPECT_NEAR(segment_overlap_length(t, t.node(3), t.node(0), t.node(3), t.node(0)), 3.0, 1e-12);
}

TEST(SegmentOverlap, PartialCollinearMatchesMonteCarlo) {
  auto t = FiniteRTree::path(3.0);
  Locus z1{1, 3.0}, z2{1, 1.0}, z3{1, 2.0}, z4{1, 0.0};  // depths [0,2] and [1,3]
  EXPECT_NEAR(segment_overlap_length(t, z1, z2, z3, z4), 1.0, 1e-12);
  const int N = 20000;
  std::vector<double> a(N), b(N);
  for (int i = 0; i < N; ++i) {
    Stream r(5, i);
    auto B = sample_brownian_on_tree(t, 0.5, r);
    a[i] = B.value(z2) - B.value(z1);
    b[i] = B.value(z4) - B.value(z3);
  }
  double se;
  double c = cov(a, b, &se);
  EXPECT_LE(std::abs(c - 1.0), 3 * se);
}

TEST(PoissonOnTree, ZeroIntensityIsEmpty) {
  Stream r(6, 0);
  EXPECT_TRUE(sample_poisson_on_tree(deep_y(), 0.0, r).empty());
}

TEST(PoissonOnTree, MeanCountAndIndependence) {
  auto t = deep_y();
  const int N = 20000;
  const double g = 3.0;
  std::vector<double> tot(N), e2(N), e3(N);
  for (int i = 0; i < N; ++i) {
    Stream r(7, i);
    for (const auto& p : sample_poisson_on_tree(t, g, r)) {
      tot[i] += 1;
      e2[i] += p.edge == 2;
      e3[i] += p.edge == 3;
    }
  }
  auto m = mean_se(tot);
  EXPECT_LE(std::abs(m.mean - g * t.total_length(false)), 3 * m.se);
  double se;
  double c = cov(e2, e3, &se);
  EXPECT_LE(std::abs(c), 3 * se);
}

TEST(Kernel, IntegratesToOne) {
  SmoothingKernel k(0.2);
  double s = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) s += k((i + 0.5) * 0.2 / n) * 0.2 / n;
  EXPECT_NEAR(s, 1.0, 1e-8);
  EXPECT_EQ(k.cdf(0.2), 1.0);
  EXPECT_NEAR(k.cdf(0.1), 0.5, 1e-15);
}

TEST(Kernel, ExponentMustExceedOne) {
  EXPECT_THROW(SmoothingKernel::from_gamma(10.0, 1.0), ConfigError);
  EXPECT_THROW(SmoothingKernel::from_gamma(10.0, 0.5), ConfigError);
  EXPECT_NEAR(SmoothingKernel::from_gamma(10.0, 3.0).a, 1e-3, 1e-15);
}

TEST(RcsOnTree, NoPointsIsPureCompensator) {
  auto t = deep_y();
  auto f = rcs_poisson_on_tree(t, {}, 4.0, SmoothingKernel(0.1));
  EXPECT_NEAR(f.value(t.node(3)), -2.0 * 3.0, 1e-12);
  EXPECT_NEAR(f.value({2, 0.5}), -2.0 * 1.5, 1e-12);
  EXPECT_EQ(f.value(t.node(0)), 0.0);
}

TEST(RcsOnTree, FarPointContributesNothing) {
  auto t = deep_y();
  SmoothingKernel k(0.1);
  auto empty = rcs_poisson_on_tree(t, {}, 4.0, k);
  auto one = rcs_poisson_on_tree(t, {{3, 1.0}}, 4.0, k);  // on the other branch
  EXPECT_EQ(one.value(t.node(2)), empty.value(t.node(2)));
  auto below = rcs_poisson_on_tree(t, {{1, 0.5}}, 4.0, k);  // on the shared trunk, fully counted
  EXPECT_NEAR(below.value(t.node(2)) - empty.value(t.node(2)), 1.0 / 2.0, 1e-12);
}

TEST(RcsOnTree, ZeroMean) {
  // points on the root ray within the kernel support are part of the process
  FiniteRTree t({-1, 0, 1, 1}, {0, 1.0, 1.0, 2.0}, 1.0);
  SmoothingKernel k(0.05);
  const double g = 20.0;
  const int N = 20000;
  std::vector<double> v(N);
  for (int i = 0; i < N; ++i) {
    Stream r(8, i);
    v[i] = rcs_poisson_on_tree(t, sample_poisson_on_tree(t, g, r, k.a), g, k).value({3, 0.7});
  }
  auto m = mean_se(v);
  EXPECT_LE(std::abs(m.mean), 3 * m.se);
}

TEST(RcsOnTree, FastMarginalAgreesWithFullField) {
  auto t = FiniteRTree::path(1.0, 1.0);
  SmoothingKernel k(0.1);
  const double g = 30.0;
  const int N = 10000;
  std::vector<double> a(N), b(N);
  for (int i = 0; i < N; ++i) {
    Stream r(9, i), s(10, i);
    auto pts = sample_poisson_on_tree(t, g, r, k.a);
    a[i] = rcs_poisson_on_tree(t, pts, g, k).value(t.node(1));
    b[i] = rcs_point_marginal(1.0, g, k, s);
  }
  EXPECT_LE(ks_two_sample(a, b).stat, 0.03);
}

TEST(RcsLine, StartsAtZeroAndCentred) {
  SmoothingKernel k(0.01);
  const int N = 10000;
  std::vector<double> end(N), inc(N);
  for (int i = 0; i < N; ++i) {
    Stream r(11, i);
    auto p = rcs_poisson_line(50.0, k, 1.0, 4, r);
    EXPECT_EQ(p[0], 0.0);
    end[i] = p[4];
    inc[i] = p[4] - p[2];
  }
  auto m = mean_se(end);
  EXPECT_LE(std::abs(m.mean), 3 * m.se);
  double se;
  double v = cov(inc, inc, &se);
  EXPECT_LE(std::abs(v - 0.5), 3 * se + 0.01);  // variance of the increment over 1/2
}

TEST(OrliczTail, GaussianQuadratic) {
  std::vector<double> z(100000);
  for (std::size_t i = 0; i < z.size(); ++i) {
    Stream r(12, i);
    z[i] = r.normal();
  }
  auto f = orlicz_tail_estimate(z, 2.0);
  EXPECT_FALSE(f.flagged);
  EXPECT_NEAR(f.slope, -0.5, 0.1);
}

TEST(OrliczTail, ExponentialLinear) {
  std::vector<double> z(100000);
  for (std::size_t i = 0; i < z.size(); ++i) {
    Stream r(13, i);
    z[i] = r.exponential();
  }
  auto f = orlicz_tail_estimate(z, 1.0);
  EXPECT_FALSE(f.flagged);
  EXPECT_NEAR(f.slope, -1.0, 0.2);
}

TEST(OrliczTail, DegenerateFlagged) {
  EXPECT_TRUE(orlicz_tail_estimate(std::vector<double>(5000, 1.0), 1.0).flagged);
  EXPECT_TRUE(orlicz_tail_estimate(std::vector<double>(10, 1.0), 1.0).flagged);
}

TEST(OrliczNorm, ExponentialFrozen) {
  // for Exp(1), E exp(Z / c) = c / (c - 1) = 2 at c = 2
  std::vector<double> z(200000);
  for (std::size_t i = 0; i < z.size(); ++i) {
    Stream r(14, i);
    z[i] = r.exponential();
  }
  EXPECT_NEAR(empirical_orlicz_norm(z), 2.0, 0.1);
  EXPECT_EQ(empirical_orlicz_norm(std::vector<double>(4, 0.0)), 0.0);
}
