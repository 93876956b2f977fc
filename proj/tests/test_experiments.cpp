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

#include "bcastle/experiments.hpp"

using namespace bcastle;

TEST(Convergence, CoincidentPointsGiveZeroDistance) {
  ConvergenceConfig c;
  c.deltas = {0.2, 0.1};
  c.x0 = c.x1 = 0.5;
  c.replicas = 200;
  auto r = convergence_experiment(c);
  ASSERT_EQ(r.series.size(), 2u);
  for (const auto& p : r.series) EXPECT_EQ(p.ks.stat, 0.0);
  EXPECT_TRUE(r.report.pass);
}

TEST(Convergence, SmallRunIsReproducible) {
  ConvergenceConfig c;
  c.deltas = {0.25, 0.1};
  c.replicas = 800;
  c.seed = 5;
  auto a = convergence_experiment(c);
  c.workers = 2;
  auto b = convergence_experiment(c);
  ASSERT_EQ(a.series.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.series[i].ks.stat, b.series[i].ks.stat);
  EXPECT_LT(a.series.back().ks.stat, 0.2);
  EXPECT_EQ(a.report.extra["series"].size(), 2u);
  EXPECT_EQ(a.report.name, "bd_to_bc_convergence");
}

TEST(Convergence, RejectsBadDeltaList) {
  ConvergenceConfig c;
  c.deltas = {0.1, 0.2};
  EXPECT_THROW(convergence_experiment(c), InputError);
  c.deltas = {};
  EXPECT_THROW(convergence_experiment(c), InputError);
}

TEST(BdIncrement, SameSiteIsZero) {
  EventField f(0.2, WebWindow{0, 1, -50, 50}, 3);
  EXPECT_EQ(bd_flat_increment(f, 1.0, 4, 4), 0.0);
  EXPECT_EQ(bd_flat_increment(f, 1.0, 0, 4), -bd_flat_increment(f, 1.0, 4, 0));
}

TEST(Singularity, ConstantFunctional) {
  SingularityConfig c;
  c.phi = [](const std::vector<double>&) { return 0.37; };
  c.replicas = 500;
  for (auto k : {ProcessKind::Castle, ProcessKind::Cauchy}) {
    c.process = k;
    auto r = singularity_statistic(c);
    EXPECT_NEAR(r.estimate.mean, 0.37, 1e-12);
    EXPECT_NEAR(r.estimate.se, 0.0, 1e-12);
  }
}

TEST(Singularity, CauchyMatchesClosedForms) {
  SingularityConfig c;
  c.process = ProcessKind::Cauchy;
  c.replicas = 40000;
  auto r = singularity_statistic(c);
  EXPECT_NEAR(r.estimate.mean, cauchy_default_closed_form(c.x), 4 * r.estimate.se);
  c.phi = phi_skew;
  r = singularity_statistic(c);
  EXPECT_NEAR(r.estimate.mean, cauchy_skew_closed_form(c.x), 4 * r.estimate.se);
}

TEST(Singularity, ScaleInvarianceOfCauchy) {
  // independent Cauchy increments are exactly self-similar
  SingularityConfig c;
  c.process = ProcessKind::Cauchy;
  c.replicas = 40000;
  c.lambdas = {1.0, 4.0, 16.0};
  auto r = singularity_statistic(c);
  EXPECT_NEAR(r.estimate.mean, cauchy_default_closed_form(c.x), 4 * r.estimate.se);
}

TEST(Singularity, ConfigChecks) {
  SingularityConfig c;
  c.lambdas = {1.0, 2.0};
  EXPECT_THROW(singularity_statistic(c), InputError);
  c.lambdas = {1.0};
  c.x = {1.0, 0.4};
  EXPECT_THROW(singularity_statistic(c), InputError);
  c.x = {0.6, 0.9};
  EXPECT_THROW(singularity_statistic(c), InputError);
  c.x = {1.0};
  EXPECT_THROW(singularity_statistic(c), InputError);
  EXPECT_THROW(cauchy_default_closed_form({1.0, 0.5}), InputError);
}
