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
#include <set>
#include <vector>

#include "bcastle/bc_sampler.hpp"
#include "bcastle/oracles.hpp"
#include "bcastle/stats.hpp"

using namespace bcastle;

namespace {

SamplerConfig fine() {
  SamplerConfig c;
  c.dt = 1e-4;
  return c;
}

}  // namespace

TEST(Forest, SinglePointHasNoMerges) {
  Stream r(1, 0);
  BCQuery q;
  q.points = {{1.0, 0.3}};
  auto F = sample_coalescing_forest(q, fine(), r);
  EXPECT_EQ(F.nodes.size(), 2u);  // leaf plus its time-0 ancestor
  EXPECT_EQ(F.roots.size(), 1u);
  EXPECT_FALSE(F.first.valid);
}

TEST(Forest, RejectsBadConfig) {
  Stream r(1, 0);
  BCQuery q;
  q.points = {{1.0, 0.0}, {1.0, 1.0}};
  SamplerConfig c;
  c.dt = 0;
  EXPECT_THROW(sample_coalescing_forest(q, c, r), ConfigError);
  q.points.clear();
  EXPECT_THROW(sample_coalescing_forest(q, fine(), r), InputError);
}

TEST(Forest, HorizonExhaustionIsTruncation) {
  Stream r(1, 0);
  BCQuery q;
  q.mode = Mode::Stationary;
  q.points = {{0.0, 0.0}, {0.0, 50.0}};
  SamplerConfig c = fine();
  c.horizon0 = 1e-3;
  c.max_doublings = 2;
  EXPECT_THROW(sample_coalescing_forest(q, c, r), TruncationError);
}

TEST(Forest, EdgeLengthsAddUpAlongLeafToRootPaths) {
  for (int s = 0; s < 50; ++s) {
    Stream r(3, s);
    BCQuery q;
    for (int i = 0; i < 6; ++i) q.points.push_back({0.5 + 0.1 * i, 0.3 * i});
    auto F = sample_coalescing_forest(q, fine(), r);
    for (int leaf = 0; leaf < F.k; ++leaf) {
      double sum = 0;
      int v = leaf;
      while (F.nodes[v].parent >= 0) {
        int p = F.nodes[v].parent;
        ASSERT_GE(F.nodes[v].t, F.nodes[p].t);
        sum += F.nodes[v].t - F.nodes[p].t;
        v = p;
      }
      EXPECT_NEAR(sum, q.points[leaf].t - F.nodes[v].t, 1e-12);
      EXPECT_NEAR(F.nodes[v].t, 0.0, 1e-12);
    }
    for (std::size_t v = F.k; v < F.nodes.size(); ++v)
      if (F.nodes[v].right >= 0) {  // binary merge
        EXPECT_GT(F.nodes[v].t, 0.0);
        EXPECT_LT(F.nodes[v].t, 1.0 + 1e-12);
      }
  }
}

TEST(Forest, TwoPathMergeTimeMatchesFirstPassage) {
  const int N = 20000;
  std::vector<double> tau(N);
  SamplerConfig c = fine();
  c.first_merge_only = true;
  for (int i = 0; i < N; ++i) {
    Stream r(1, i);
    BCQuery q;
    q.mode = Mode::Stationary;
    q.points = {{0, 0}, {0, 1}};
    tau[i] = sample_coalescing_forest(q, c, r).first.tau;
  }
  EXPECT_LE(ks_one_sample(tau, [](double s) { return first_passage_cdf(s, 1.0); }).stat, 0.02);
}

TEST(Evaluate, SinglePointFlatMarginal) {
  const int N = 20000;
  std::vector<double> h(N);
  for (int i = 0; i < N; ++i) {
    Stream r(4, i);
    BCQuery q;
    q.points = {{2.0, 0.0}};
    q.ic = StepFunction::constant(1.5);
    auto F = sample_coalescing_forest(q, fine(), r);
    h[i] = evaluate_bc(F, q.ic, r)[0];
  }
  auto ks = ks_one_sample(h, [](double x) { return 0.5 * std::erfc(-(x - 1.5) / (2.0)); });  // N(1.5, 2)
  EXPECT_LE(ks.stat, 0.02);
}

TEST(Evaluate, InitialConditionAtAncestor) {
  // h0 = step at 0; with t tiny the value is h0(x) up to a tiny Gaussian
  Stream r(5, 0);
  BCQuery q;
  q.points = {{1e-10, -1.0}, {1e-10, 1.0}};
  q.ic = StepFunction{{0.0}, {-3.0, 4.0}};
  auto F = sample_coalescing_forest(q, fine(), r);
  auto v = evaluate_bc(F, q.ic, r);
  EXPECT_NEAR(v[0], -3.0, 1e-3);
  EXPECT_NEAR(v[1], 4.0, 1e-3);
}

TEST(Evaluate, SharedPathGivesIdenticalValues) {
  Stream r(6, 0);
  BCQuery q;
  q.points = {{1.0, 0.25}, {1.0, 0.25}};
  auto F = sample_coalescing_forest(q, fine(), r);
  auto v = evaluate_bc(F, q.ic, r);
  EXPECT_EQ(v[0], v[1]);
}

TEST(Evaluate, UnlabeledRootRejected) {
  CoalescenceForest F;
  F.mode = Mode::FixedIC;
  F.k = 1;
  F.nodes = {ForestNode{1.0, 0.0, -1, -1, 1, 0, 0}, ForestNode{0.0, 0.0, -1, -1, -1, 0, 0}};
  F.roots = {1};
  Stream r(0, 0);
  EXPECT_THROW(evaluate_bc(F, StepFunction::constant(0), r), InputError);
}

TEST(Stationary, IdenticalPointsGiveZero) {
  Stream r(7, 0);
  EXPECT_EQ(stationary_increments({0.4, 0.4}, fine(), r), std::vector<double>{0.0});
}

TEST(Stationary, IncrementsAreSymmetricCauchy) {
  const int N = 20000;
  std::vector<double> inc(N);
  for (int i = 0; i < N; ++i) {
    Stream r(8, i);
    inc[i] = stationary_increments({0.0, 1.0}, fine(), r)[0];
  }
  EXPECT_LE(ks_one_sample(inc, [](double x) { return cauchy_cdf(kKappa, x); }).stat, 0.02);
  std::vector<double> neg(inc);
  for (auto& v : neg) v = -v;
  EXPECT_LE(ks_two_sample(inc, neg).stat, 0.03);
  EXPECT_FALSE(cauchy_scale_fit(inc, 1, 0).tail_flag);
}

TEST(Stationary, DiffusiveScaling) {
  const int N = 20000;
  std::vector<double> a(N), b(N);
  for (int i = 0; i < N; ++i) {
    Stream r(10, i), s(11, i);
    a[i] = stationary_increments({0.0, 2.0}, fine(), r)[0];
    b[i] = 2 * stationary_increments({0.0, 1.0}, fine(), s)[0];
  }
  EXPECT_LE(ks_two_sample(a, b).stat, 0.02);
}

TEST(Slice, OnePointIsConstant) {
  Stream r(12, 0);
  auto s = bc_slice(1.0, 1.0, 1, StepFunction::constant(0), fine(), r);
  EXPECT_EQ(s.h.size(), 1u);
  EXPECT_TRUE(s.as_step().jumps.empty());
}

TEST(Slice, InitialConditionImageBoundedByAncestors) {
  // the part of h(t, .) inherited from h0 takes at most one value per time-0
  // ancestor; the Gaussian part makes all grid values distinct
  StepFunction ic{{-0.5, 0.0, 0.5}, {0.0, 1.0, 2.0, 3.0}};
  for (int k = 0; k < 20; ++k) {
    Stream r(13, k);
    BCQuery q;
    q.ic = ic;
    for (double x : grid(-1.0, 1.0, 200)) q.points.push_back({0.5, x});
    auto F = sample_coalescing_forest(q, fine(), r);
    std::set<int> roots;
    std::set<double> inherited;
    for (int leaf = 0; leaf < F.k; ++leaf) {
      int v = leaf;
      while (F.nodes[v].parent >= 0) v = F.nodes[v].parent;
      roots.insert(v);
      inherited.insert(ic(F.nodes[v].x));
    }
    EXPECT_EQ(roots.size(), F.roots.size());
    EXPECT_LE(inherited.size(), roots.size());
    auto h = evaluate_bc(F, ic, r);
    EXPECT_EQ(std::set<double>(h.begin(), h.end()).size(), h.size());
    Stream r2(13, k);
    auto s = bc_slice(0.5, 1.0, 200, ic, fine(), r2);
    EXPECT_EQ(s.distinct_ancestors, static_cast<int>(F.roots.size()));
    EXPECT_TRUE(std::is_sorted(s.x.begin(), s.x.end()));
  }
}

TEST(Slice, RejectsBadInput) {
  Stream r(0, 0);
  EXPECT_THROW(bc_slice(0.0, 1.0, 5, StepFunction::constant(0), fine(), r), InputError);
  EXPECT_THROW(bc_slice(1.0, 1.0, 0, StepFunction::constant(0), fine(), r), InputError);
}

TEST(PointCount, LargeEpsilonFullyCoalesced) {
  Stream r(14, 0);
  EXPECT_EQ(coalescing_point_count(1e4, 1e4, 0.5, 20, fine(), r), 1);
}

TEST(PointCount, MonotoneOnCoupledRuns) {
  std::vector<double> eps{1.0 / 512, 1.0 / 64, 1.0 / 16}, Rs{0.5, 1.0, 2.0};
  SamplerConfig c = fine();
  c.dt = 1e-5;
  for (int k = 0; k < 10; ++k) {
    Stream r(15, k);
    auto pc = coalescing_point_counts(1.0, eps, 2.0, 801, Rs, c, r);
    for (std::size_t e = 0; e < eps.size(); ++e)
      for (std::size_t i = 0; i < Rs.size(); ++i) {
        if (i + 1 < Rs.size()) {
          EXPECT_LE(pc.counts[e][i], pc.counts[e][i + 1]);
        }
        if (e + 1 < eps.size()) {
          EXPECT_GE(pc.counts[e][i], pc.counts[e + 1][i]);
        }
      }
  }
}

TEST(Periodic, OnePointIsZero) {
  Stream r(16, 0);
  EXPECT_EQ(periodic_coalescence_time(1.0, 1, fine(), r), 0.0);
}

TEST(Periodic, TimesArePositive) {
  for (int k = 0; k < 20; ++k) {
    Stream r(17, k);
    EXPECT_GT(periodic_coalescence_time(1.0, 16, fine(), r), 0.0);
  }
}

TEST(PVariation, ConstantAndSingleJump) {
  EXPECT_EQ(p_variation(StepFunction::constant(2.0), 1.5), 0.0);
  StepFunction f{{0.3}, {1.0, 3.5}};
  for (double p : {1.0, 1.5, 2.0}) EXPECT_NEAR(p_variation(f, p), std::pow(2.5, p), 1e-12);
}

TEST(PVariation, MonotoneSequenceUsesEndpointsForLargeP) {
  // for p >= 1 a monotone run is best taken in one piece
  EXPECT_NEAR(p_variation(std::vector<double>{0, 1, 2, 3}, 2.0), 9.0, 1e-12);
  EXPECT_NEAR(p_variation(std::vector<double>{0, 1, 0, 1}, 1.0), 3.0, 1e-12);
}
