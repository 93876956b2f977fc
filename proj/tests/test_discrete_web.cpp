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
#include <sstream>
#include <vector>

#include "bcastle/discrete_web.hpp"
#include "bcastle/spatial_tree.hpp"

using namespace bcastle;

namespace {

WebTree tree_with_growth(double delta, WebWindow w, std::uint64_t seed, const std::vector<WebPoint>& pts,
                         WebWindow* used = nullptr) {
  return with_enlargement(w, 6, [&](WebWindow ww) {
    if (used) *used = ww;
    EventField f(delta, ww, seed);
    return web_tree_view(f, pts);
  });
}

}  // namespace

TEST(EventField, RejectsBadParameters) {
  EXPECT_THROW(EventField(0.0, WebWindow{}, 1), InputError);
  EXPECT_THROW(EventField(1.5, WebWindow{}, 1), InputError);
  EXPECT_THROW(EventField(0.5, WebWindow{1, 1, 0, 0}, 1), InputError);
  EXPECT_THROW(EventField(0.5, WebWindow{}, 1, -3), InputError);
}

TEST(EventField, RatesAtUnitDelta) {
  // delta = 1: gamma = 1/2, dots at rate 1, each arrow kind at rate 1/2
  EventField f(1.0, WebWindow{0, 200, 0, 49}, 11);
  double dots = 0, left = 0, right = 0;
  for (long k = 0; k < 50; ++k)
    for (const auto& e : f.events(k, 0, 200)) {
      dots += e.kind == EventKind::Dot;
      left += e.kind == EventKind::Left;
      right += e.kind == EventKind::Right;
    }
  const double exposure = 50 * 200.0;
  EXPECT_NEAR(dots / exposure, 1.0, 4 * std::sqrt(1.0 / exposure));
  EXPECT_NEAR(left / exposure, 0.5, 4 * std::sqrt(0.5 / exposure));
  EXPECT_NEAR(right / exposure, 0.5, 4 * std::sqrt(0.5 / exposure));
}

TEST(EventField, EventsSortedInsideInterval) {
  EventField f(0.3, WebWindow{0, 5, -3, 3}, 2);
  auto ev = f.events(1, 0.7, 4.1);
  ASSERT_FALSE(ev.empty());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    EXPECT_GT(ev[i].t, 0.7);
    EXPECT_LE(ev[i].t, 4.1);
    EXPECT_GE(ev[i].mark, 0.0);
    EXPECT_LT(ev[i].mark, 1.0);
    if (i) {
      EXPECT_LT(ev[i - 1].t, ev[i].t);
    }
  }
  long d = 0;
  for (const auto& e : ev) d += e.kind == EventKind::Dot;
  EXPECT_EQ(d, f.dots(1, 0.7, 4.1));
}

TEST(EventField, DeterministicAndWindowIndependent) {
  EventField a(0.2, WebWindow{0, 1, -5, 5}, 99), b(0.2, WebWindow{-4, 3, -50, 50}, 99), c(0.2, WebWindow{0, 1, -5, 5}, 98);
  for (long k = -5; k <= 5; ++k) {
    auto ea = a.events(k, 0, 1), eb = b.events(k, 0, 1), ec = c.events(k, 0, 1);
    ASSERT_EQ(ea.size(), eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
      EXPECT_EQ(ea[i].t, eb[i].t);
      EXPECT_EQ(ea[i].kind, eb[i].kind);
    }
  }
  std::ostringstream s1, s2, s3;
  a.write_jsonl(s1);
  EventField(0.2, WebWindow{0, 1, -5, 5}, 99).write_jsonl(s2);
  c.write_jsonl(s3);
  EXPECT_EQ(s1.str(), s2.str());
  EXPECT_NE(s1.str(), s3.str());
}

TEST(EventField, PeriodicWrap) {
  EventField f(0.5, WebWindow{0, 1, 0, 0}, 3, 8);
  EXPECT_EQ(f.wrap(-1), 7);
  EXPECT_EQ(f.wrap(8), 0);
  EXPECT_EQ(f.wrap(17), 1);
  EXPECT_EQ(f.site_count(), 8);
  auto a = f.events(-1, 0, 1), b = f.events(7, 0, 1);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].t, b[i].t);
}

TEST(BackwardWalk, ConstantWithoutArrows) {
  EventField f(0.5, WebWindow{0, 2, -20, 20}, 5);
  // start just below the first arrow above the floor: no arrow in between
  auto n = f.next_arrow_time(0, 0.0, 2.0);
  ASSERT_TRUE(n.has_value());
  double t = *n * 0.999;
  auto p = backward_walk(f, t, 0, 0.0);
  ASSERT_EQ(p.segs.size(), 1u);
  EXPECT_EQ(p.site_at(0.0), 0);
  EXPECT_EQ(p.total_dots(), f.dots(0, 0.0, t));
}

TEST(BackwardWalk, JumpsFollowArrows) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EventField f(0.2, WebWindow{0, 1, -200, 200}, seed);
    auto p = backward_walk(f, 1.0, 0, 0.0);
    for (std::size_t i = 0; i + 1 < p.segs.size(); ++i) {
      const auto& s = p.segs[i];
      auto arr = f.prev_arrow(s.site, s.hi, 0.0);
      ASSERT_TRUE(arr.has_value());
      EXPECT_EQ(arr->t, s.lo);  // the latest arrow below the segment top
      long expected = arr->kind == EventKind::Left ? s.site + 1 : s.site - 1;
      EXPECT_EQ(p.segs[i + 1].site, expected);
      EXPECT_EQ(p.segs[i + 1].hi, s.lo);
      EXPECT_EQ(s.dots, f.dots(s.site, s.lo, s.hi));
    }
    EXPECT_FALSE(f.prev_arrow(p.segs.back().site, p.segs.back().hi, 0.0).has_value());
  }
}

TEST(BackwardWalk, TruncationOutsideWindow) {
  EventField f(1.0, WebWindow{0, 20, 0, 0}, 4);
  EXPECT_THROW(backward_walk(f, 20.0, 0), TruncationError);
  EXPECT_THROW(backward_walk(f, 21.0, 0), InputError);
}

TEST(BackwardWalk, PathsCoalesceAndStayTogether) {
  EventField f(0.2, WebWindow{-10, 1, -400, 400}, 17);
  auto a = backward_walk(f, 1.0, 0, -10.0), b = backward_walk(f, 1.0, 3, -10.0);
  auto m = meeting_time(a, b);
  ASSERT_TRUE(m.has_value());
  EXPECT_LT(*m, 1.0);
  // at the meeting time itself the jumping path still sits on its upper segment
  for (double u = *m - 1e-9; u > -10; u -= 0.01) EXPECT_EQ(a.site_at(u), b.site_at(u)) << u;
}

TEST(BackwardWalk, SameTimePathsNeverCross) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EventField f(0.2, WebWindow{0, 1, -300, 300}, seed);
    auto a = backward_walk(f, 1.0, -1, 0.0), b = backward_walk(f, 1.0, 1, 0.0);
    for (double u = 1.0; u > 0; u -= 0.005) EXPECT_LE(a.site_at(u), b.site_at(u));
  }
}

TEST(DualWalk, NeverCrossesPrimal) {
  int crossings = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EventField f(0.1, WebWindow{0, 1, -300, 300}, seed);
    for (int i = 0; i < 5; ++i) {
      auto b = backward_walk(f, 1.0, -2 + i, 0.0);
      for (long j = -4; j < 4; ++j) crossings += count_crossings(b, forward_walk(f, 0.0, j, 1.0));
    }
  }
  EXPECT_EQ(crossings, 0);
}

TEST(AncestralDistance, BasicCases) {
  EventField f(0.25, WebWindow{-20, 1, -500, 500}, 8);
  EXPECT_EQ(ancestral_distance(f, 1.0, 0, 1.0, 0), 0.0);
  double d = ancestral_distance(f, 1.0, 0, 1.0, 2);
  EXPECT_GT(d, 0.0);
  EXPECT_EQ(d, ancestral_distance(f, 1.0, 2, 1.0, 0));
  // a point on the ancestral line of another is at time distance
  auto p = backward_walk(f, 1.0, 0, -20.0);
  EXPECT_NEAR(ancestral_distance(f, 1.0, 0, 0.5, p.site_at(0.5)), 0.5, 1e-12);
}

TEST(WebTree, SinglePointIsARay) {
  EventField f(0.2, WebWindow{0, 1, -50, 50}, 1);
  auto w = web_tree_view(f, {{0.6, 3}});
  EXPECT_EQ(w.tree().size(), 1);
  EXPECT_NEAR(w.tree().ray(), 0.6, 1e-12);
  EXPECT_EQ(w.site_at(w.tree().node(w.point_node[0])), 3);
}

TEST(WebTree, TwoPointsMakeAY) {
  WebWindow used;
  auto w = tree_with_growth(0.2, WebWindow{-2, 1, -100, 100}, 3, {{1.0, 0}, {1.0, 4}}, &used);
  EventField f(0.2, used, 3);
  double m = *meeting_time(backward_walk(f, 1.0, 0), backward_walk(f, 1.0, 4));
  const auto& T = w.tree();
  for (int p = 0; p < 2; ++p) EXPECT_NEAR(T.depth(T.node(w.point_node[p])), 1.0 - m, 1e-12);
  EXPECT_NEAR(w.t_root, m, 1e-12);
  EXPECT_NEAR(T.ray(), m - used.t0, 1e-12);
}

TEST(WebTree, BranchCountAndCharacteristic) {
  std::vector<WebPoint> pts{{1.0, -6}, {1.0, -1}, {0.8, 0}, {0.9, 2}, {1.0, 5}, {0.7, 9}};
  auto w = tree_with_growth(0.1, WebWindow{-2, 1, -200, 200}, 21, pts);
  const auto& T = w.tree();
  int branch = 0;
  for (int v = 0; v < T.size(); ++v) branch += T.children(v).size() >= 2;
  EXPECT_LE(branch, static_cast<int>(pts.size()) - 1);
  auto rep = check_characteristic(w.st, 3000, 5);
  EXPECT_EQ(rep.violations, 0);
  EXPECT_LE(w.max_interp_gap, 0.1 + 1e-12);
}

TEST(WebTree, DuplicatesCollapse) {
  EventField f(0.2, WebWindow{-5, 1, -100, 100}, 2);
  auto w = web_tree_view(f, {{1.0, 0}, {1.0, 0}});
  EXPECT_EQ(w.points.size(), 1u);
  EXPECT_THROW(web_tree_view(f, {}), InputError);
}

TEST(Gibbs, Examples) {
  EXPECT_EQ(gibbs_choice(kBetaInf, {2, 1, 1}, 0.5), 2.0);
  auto p0 = gibbs_probabilities(0.0, {2, 1, 1});
  for (double p : p0) EXPECT_NEAR(p, 1.0 / 3, 1e-15);
  auto p5 = gibbs_probabilities(5.0, {0, 1, 1});
  EXPECT_NEAR(p5[0], 0.00336, 5e-6);
  EXPECT_NEAR(p5[0] + p5[1] + p5[2], 1.0, 1e-15);
  // ties at infinity prefer the h + 1 move, then the left neighbour
  auto pi = gibbs_probabilities(kBetaInf, {3, 3, 3});
  EXPECT_EQ(pi[1], 1.0);
  pi = gibbs_probabilities(kBetaInf, {3, 2, 3});
  EXPECT_EQ(pi[0], 1.0);
}

TEST(BetaBd, InfinityIsMaxRule) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EventField f(0.2, WebWindow{0, 1, -30, 30}, seed);
    HeightField h0{0, -30, std::vector<double>(61)};
    for (long k = -30; k <= 30; ++k) h0.h[k + 30] = std::floor(3 * std::sin(0.4 * k));
    EXPECT_EQ(simulate_beta_bd(f, kBetaInf, h0).back().h, max_rule_reference(f, h0).h);
  }
}

TEST(BetaBd, PeriodicInfinityIsMaxRule) {
  EventField f(0.3, WebWindow{0, 1, 0, 0}, 6, 12);
  HeightField h0{0, 0, {0, 1, 2, 3, 2, 1, 0, -1, -2, -3, -2, -1}};
  EXPECT_EQ(simulate_beta_bd(f, kBetaInf, h0).back().h, max_rule_reference(f, h0).h);
}

TEST(BetaBd, WindowMismatchRejected) {
  EventField f(0.2, WebWindow{0, 1, -3, 3}, 1);
  EXPECT_THROW(simulate_beta_bd(f, 0.0, HeightField{0, -3, std::vector<double>(6)}), InputError);
  EXPECT_THROW(simulate_beta_bd(f, 0.0, HeightField{0, -2, std::vector<double>(7)}), InputError);
  EXPECT_THROW(simulate_beta_bd(f, -1.0, HeightField{0, -3, std::vector<double>(7)}), InputError);
}

TEST(BetaBd, SnapshotsInOrder) {
  EventField f(0.2, WebWindow{0, 1, -3, 3}, 1);
  auto s = simulate_beta_bd(f, 0.0, HeightField{0, -3, std::vector<double>(7)}, {0.5, 0.25});
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].t, 0.25);
  EXPECT_EQ(s[1].t, 0.5);
  EXPECT_EQ(s[2].t, 1.0);
}

TEST(Rescale, FlatAtStartAndRefusesPositiveBeta) {
  EventField f(0.2, WebWindow{0, 1, -3, 3}, 1);
  HeightField h0{0, -3, std::vector<double>(7, 0.0)};
  auto r = rescale_height(simulate_beta_bd(f, 0.0, h0, {0.0}).front(), f, 0.0);
  for (double v : r.h) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(rescale_height(h0, f, 1.0), InputError);
}

TEST(Rescale, VarianceGrowsLinearly) {
  // flat start: delta (Poisson(2 gamma t) - 2 gamma t) has variance t
  std::vector<double> v;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    EventField f(0.1, WebWindow{0, 0.5, -400, 400}, seed);
    for (long k = -200; k <= 200; k += 40) v.push_back(bd_height_at_point(f, [](long) { return 0.0; }, 0.5, k));
  }
  double m = 0, s2 = 0;
  for (double x : v) m += x;
  m /= v.size();
  for (double x : v) s2 += (x - m) * (x - m);
  s2 /= v.size() - 1;
  EXPECT_NEAR(m, 0.0, 4 * std::sqrt(0.5 / v.size()));
  EXPECT_NEAR(s2, 0.5, 0.5 * 0.3);
}

TEST(Rcpp, RootIsZeroAndPointsCountDots) {
  WebWindow used;
  std::vector<WebPoint> pts{{1.0, -2}, {1.0, 3}, {0.8, 0}};
  auto w = tree_with_growth(0.2, WebWindow{-2, 1, -100, 100}, 12, pts, &used);
  EventField f(0.2, used, 12);
  const auto& T = w.tree();
  EXPECT_EQ(rcpp_on_tree(w, f, T.node(T.root())), 0.0);
  for (int p = 0; p < 3; ++p) {
    auto path = backward_walk(f, w.points[p].t, w.points[p].site, used.t0);
    long dots = 0;
    for (const auto& s : path.segs) {
      double lo = std::max(s.lo, w.t_root), hi = s.hi;
      if (hi > lo) dots += f.dots(s.site, lo, hi);
    }
    double expected = f.delta() * (dots - 2 * f.gamma() * (w.points[p].t - w.t_root));
    EXPECT_NEAR(rcpp_on_tree(w, f, T.node(w.point_node[p])), expected, 1e-9);
  }
  EventField other(0.2, used, 13);
  EXPECT_THROW(rcpp_on_tree(w, other, T.node(T.root())), InputError);
}

TEST(Rcpp, ZeroMean) {
  // Dots are independent of the arrows, so dropping the rare replicas whose
  // meeting time exceeds the largest window leaves the mean unbiased.
  std::vector<double> v;
  int dropped = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    WebWindow used;
    WebTree w;
    try {
      w = tree_with_growth(0.2, WebWindow{-1, 1, -60, 60}, seed, {{1.0, 0}, {1.0, 2}}, &used);
    } catch (const TruncationError&) {
      ++dropped;
      continue;
    }
    EventField f(0.2, used, seed);
    v.push_back(rcpp_on_tree(w, f, w.tree().node(w.point_node[0])));
  }
  double m = 0, s2 = 0;
  for (double x : v) m += x;
  m /= v.size();
  for (double x : v) s2 += (x - m) * (x - m);
  s2 /= v.size() - 1;
  EXPECT_NEAR(m, 0.0, 4 * std::sqrt(s2 / v.size()));
  EXPECT_LE(dropped, 15);
}

TEST(BdHeight, InitialTimeAndConsistency) {
  auto h0 = [](long k) { return 0.1 * std::floor(3 * std::sin(0.3 * k)); };
  EventField f(0.1, WebWindow{0, 1, -60, 60}, 100);
  for (long k = -5; k <= 5; ++k) EXPECT_EQ(bd_height_at_point(f, h0, 0.0, k), h0(k));

  // tree view, direct walk and forward simulation agree
  HeightField raw0{0, -60, std::vector<double>(121)};
  for (long k = -60; k <= 60; ++k) raw0.h[k + 60] = std::floor(3 * std::sin(0.3 * k));
  auto resc = rescale_height(simulate_beta_bd(f, 0.0, raw0).back(), f, 0.0);
  for (long k = -10; k <= 10; ++k) EXPECT_NEAR(bd_height_at_point(f, h0, 1.0, k), resc.at(k), 1e-9) << k;

  WebWindow used;
  std::vector<WebPoint> pts{{1.0, -3}, {1.0, 0}, {0.7, 2}, {1.0, 4}};
  auto w = with_enlargement(WebWindow{0, 1, -60, 60}, 6, [&](WebWindow ww) {
    used = ww;
    return web_tree_view(EventField(0.1, ww, 100), pts, 0.0);
  });
  EventField g(0.1, used, 100);
  for (int p = 0; p < 4; ++p)
    EXPECT_NEAR(bd_height_at(w, g, h0, w.tree().node(w.point_node[p])),
                bd_height_at_point(f, h0, w.points[p].t, w.points[p].site), 1e-9);
}
