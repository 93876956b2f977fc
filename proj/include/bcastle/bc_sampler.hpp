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
#pragma once

// Finite-dimensional Brownian Castle sampling.
//
// Backward coalescing Brownian motions are started from the query points,
// the resulting forest gets an independent N(0, length) variable per edge,
// and the value at a query point is the initial condition at the root
// position plus the sum along the leaf's path. Merging between adjacent
// paths uses the Brownian-bridge hitting probability of their difference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bcastle/errors.hpp"
#include "bcastle/rng.hpp"

namespace bcastle {

// Right-continuous step function: value vals[k] on [jumps[k-1], jumps[k]).
struct StepFunction {
  std::vector<double> jumps;
  std::vector<double> vals{0.0};

  static StepFunction constant(double c) { return {{}, {c}}; }

  void validate() const {
    if (vals.size() != jumps.size() + 1) throw InputError("step function: vals must have jumps+1 entries");
    for (std::size_t i = 1; i < jumps.size(); ++i)
      if (!(jumps[i] > jumps[i - 1])) throw InputError("step function: jumps must increase");
  }
  double operator()(double x) const {
    auto k = std::upper_bound(jumps.begin(), jumps.end(), x) - jumps.begin();
    return vals[static_cast<std::size_t>(k)];
  }
};

enum class Mode { FixedIC, Stationary, Periodic };

struct BCPoint {
  double t = 0, x = 0;
};

struct BCQuery {
  std::vector<BCPoint> points;
  StepFunction ic = StepFunction::constant(0.0);
  Mode mode = Mode::FixedIC;
  double period = 0;  // circle length in periodic mode
  double floor = 0;   // time at which fixed-ic paths stop
};

struct SamplerConfig {
  double dt = 1e-4;            // smallest step
  double step_factor = 0.01;   // step = max(dt, factor * smallest gap^2)
  double horizon0 = 0;         // stationary horizon; 0 means 4 * (largest gap)^2
  int max_doublings = 40;
  bool first_merge_only = false;
  std::vector<double> snapshots;  // elapsed times (from the latest query time) to record clusters
};

struct ForestNode {
  double t = 0, x = 0;
  int left = -1, right = -1, parent = -1;
  int lo = 0, hi = 0;  // range of leaf ranks (x-order) below this node
};

struct FirstExit {
  bool valid = false;
  double tau = 0;    // elapsed time at the first meeting
  int pair = 0;      // 1-based index j: paths j and j+1 met
  std::vector<double> positions;  // the n-1 surviving positions right after the meeting
};

struct CoalescenceForest {
  Mode mode = Mode::FixedIC;
  int k = 0;                      // leaves are nodes 0..k-1 (query order)
  std::vector<ForestNode> nodes;  // parents always have larger ids than children
  std::vector<int> roots;
  std::vector<int> rank;          // leaf -> rank in x-order
  FirstExit first;
  std::vector<std::vector<std::pair<int, int>>> snapshots;  // per snapshot: (lo, hi) of live clusters
  double end_time = 0;            // floor (fixed ic) or time of the last merge

  struct Edge {
    int child, parent;
    double length;
  };
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (int v = 0; v < static_cast<int>(nodes.size()); ++v)
      if (nodes[v].parent >= 0) out.push_back({v, nodes[v].parent, nodes[v].t - nodes[nodes[v].parent].t});
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json leaves = nlohmann::json::array(), merges = nlohmann::json::array(), es = nlohmann::json::array();
    for (int i = 0; i < k; ++i) leaves.push_back({{"t", nodes[i].t}, {"x", nodes[i].x}});
    for (int v = k; v < static_cast<int>(nodes.size()); ++v)
      if (nodes[v].left >= 0 && nodes[v].right >= 0)
        merges.push_back({{"node", v}, {"time", nodes[v].t}, {"left", nodes[v].left}, {"right", nodes[v].right}});
    for (const auto& e : edges()) es.push_back({{"child", e.child}, {"parent", e.parent}, {"length", e.length}});
    nlohmann::json rs = nlohmann::json::array();
    for (int r : roots) rs.push_back({{"node", r}, {"time", nodes[r].t}, {"x", nodes[r].x}});
    return {{"leaves", leaves}, {"merges", merges}, {"edges", es}, {"roots", rs}};
  }
};

namespace detail {
struct Live {
  int node;
  double x0, x1;  // position at the start and end of the current step
};
}  // namespace detail

inline CoalescenceForest sample_coalescing_forest(const BCQuery& q, const SamplerConfig& cfg, Stream& rng) {
  if (!(cfg.dt > 0)) throw ConfigError("sampler: dt must be positive");
  if (q.points.empty()) throw InputError("sampler: no query points");
  if (q.mode == Mode::Periodic && !(q.period > 0)) throw ConfigError("sampler: periodic mode needs a positive period");
  const int k = static_cast<int>(q.points.size());
  CoalescenceForest F;
  F.mode = q.mode;
  F.k = k;
  F.nodes.resize(k);
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return q.points[a].x < q.points[b].x; });
  F.rank.assign(k, 0);
  for (int r = 0; r < k; ++r) F.rank[order[r]] = r;
  for (int i = 0; i < k; ++i) {
    const auto& p = q.points[i];
    if (q.mode == Mode::FixedIC && p.t < q.floor) throw InputError("sampler: query time below the floor");
    double x = p.x;
    if (q.mode == Mode::Periodic) x -= q.period * std::floor(x / q.period);
    F.nodes[i] = {p.t, x, -1, -1, -1, F.rank[i], F.rank[i]};
  }
  // births in decreasing time
  std::vector<int> births(k);
  std::iota(births.begin(), births.end(), 0);
  std::stable_sort(births.begin(), births.end(), [&](int a, int b) {
    if (q.points[a].t != q.points[b].t) return q.points[a].t > q.points[b].t;
    return F.nodes[a].x < F.nodes[b].x;
  });
  const double t_start = q.points[births[0]].t;
  std::vector<detail::Live> live;
  std::size_t next_birth = 0;
  double s = t_start;

  auto new_merge = [&](int a, int b, double t, double x) {
    ForestNode m;
    m.t = std::min({t, F.nodes[a].t, F.nodes[b].t});
    m.x = x;
    m.left = a;
    m.right = b;
    m.lo = std::min(F.nodes[a].lo, F.nodes[b].lo);
    m.hi = std::max(F.nodes[a].hi, F.nodes[b].hi);
    int id = static_cast<int>(F.nodes.size());
    F.nodes.push_back(m);
    F.nodes[a].parent = id;
    F.nodes[b].parent = id;
    return id;
  };

  auto add_births = [&]() {
    while (next_birth < births.size() && q.points[births[next_birth]].t >= s) {
      int i = births[next_birth++];
      double x = F.nodes[i].x;
      auto it = std::lower_bound(live.begin(), live.end(), x, [](const detail::Live& l, double v) { return l.x1 < v; });
      if (it != live.end() && it->x1 == x) {
        it->node = new_merge(it->node, i, s, x);  // born on an existing path
        continue;
      }
      live.insert(it, {i, x, x});
    }
  };
  add_births();

  double horizon = cfg.horizon0;
  if (q.mode != Mode::FixedIC && horizon <= 0) {
    double span = 0;
    for (const auto& p : q.points) span = std::max(span, std::abs(p.x - q.points[0].x));
    if (q.mode == Mode::Periodic) span = std::min(span, q.period);
    horizon = 4.0 * std::max(span * span, cfg.dt);
  }
  int doublings = 0;
  std::size_t snap = 0;
  F.snapshots.resize(cfg.snapshots.size());
  const double L = q.period;
  const bool periodic = q.mode == Mode::Periodic;

  auto record_snapshots = [&](double elapsed) {
    while (snap < cfg.snapshots.size() && cfg.snapshots[snap] <= elapsed + 1e-12) {
      for (const auto& l : live) F.snapshots[snap].push_back({F.nodes[l.node].lo, F.nodes[l.node].hi});
      ++snap;
    }
  };
  record_snapshots(0.0);

  while (true) {
    bool births_left = next_birth < births.size();
    if (!births_left && live.size() == 1 && q.mode != Mode::FixedIC) break;
    if (!births_left && snap >= cfg.snapshots.size() && cfg.first_merge_only && F.first.valid) break;
    double stop = -std::numeric_limits<double>::infinity();
    if (q.mode == Mode::FixedIC) {
      if (s <= q.floor && !births_left) break;
      stop = q.floor;
    } else if (t_start - s >= horizon) {
      if (doublings >= cfg.max_doublings) throw TruncationError("stationary horizon exhausted", t_start - horizon);
      horizon *= 2;
      ++doublings;
    }
    if (births_left) stop = std::max(stop, q.points[births[next_birth]].t);
    if (snap < cfg.snapshots.size()) stop = std::max(stop, t_start - cfg.snapshots[snap]);
    // step size from the smallest adjacent gap
    double h;
    if (live.size() <= 1) {
      h = std::isfinite(stop) ? s - stop : cfg.dt;
    } else {
      double g = std::numeric_limits<double>::infinity();
      for (std::size_t i = 1; i < live.size(); ++i) g = std::min(g, live[i].x1 - live[i - 1].x1);
      if (periodic) g = std::min(g, L - (live.back().x1 - live.front().x1));
      h = std::max(cfg.dt, cfg.step_factor * g * g);
    }
    if (std::isfinite(stop)) h = std::min(h, s - stop);
    if (!(h > 0)) h = cfg.dt;
    const double sq = std::sqrt(h);
    for (auto& l : live) {
      l.x0 = l.x1;
      l.x1 = l.x0 + sq * rng.normal();
    }
    const double s_new = s - h;
    if (live.size() > 1) {
      std::vector<detail::Live> out;
      out.reserve(live.size());
      out.push_back(live[0]);
      bool merged_now = false;
      int first_pair = 0;
      double first_time = 0, first_x = 0;
      auto meets = [&](double a, double b) {
        if (b <= 0 || a <= 0) return true;
        return rng.uniform() < std::exp(-a * b / h);
      };
      for (std::size_t i = 1; i < live.size(); ++i) {
        auto& prev = out.back();
        const auto& cur = live[i];
        if (meets(cur.x0 - prev.x0, cur.x1 - prev.x1)) {
          double tm = s - rng.uniform() * h;
          double xm = 0.5 * (prev.x1 + cur.x1);
          if (!merged_now && !F.first.valid) {
            first_pair = static_cast<int>(out.size());
            first_time = tm;
            first_x = xm;
          }
          merged_now = true;
          prev.node = new_merge(prev.node, cur.node, tm, xm);
          prev.x0 = 0.5 * (prev.x0 + cur.x0);
          prev.x1 = xm;
        } else {
          out.push_back(cur);
        }
      }
      if (periodic && out.size() > 1) {
        auto& a = out.front();
        auto& b = out.back();
        if (meets(L - (b.x0 - a.x0), L - (b.x1 - a.x1))) {
          double tm = s - rng.uniform() * h;
          double xm = 0.5 * (a.x1 + b.x1 - L);
          if (!merged_now && !F.first.valid) {
            first_pair = static_cast<int>(out.size());
            first_time = tm;
            first_x = xm;
          }
          merged_now = true;
          a.node = new_merge(a.node, b.node, tm, xm);
          a.x0 = 0.5 * (a.x0 + b.x0 - L);
          a.x1 = xm;
          out.pop_back();
        }
      }
      if (merged_now && !F.first.valid) {
        F.first.valid = true;
        F.first.tau = t_start - first_time;
        F.first.pair = first_pair;
        for (const auto& l : out) F.first.positions.push_back(l.x1);
        (void)first_x;
      }
      live.swap(out);
    }
    s = s_new;
    if (periodic) {
      // keep positions in a bounded range without changing the order
      double shift = L * std::floor(live.front().x1 / L);
      if (shift != 0)
        for (auto& l : live) {
          l.x1 -= shift;
          l.x0 -= shift;
        }
    }
    record_snapshots(t_start - s);
    add_births();
  }

  if (q.mode == Mode::FixedIC) {
    F.end_time = q.floor;
    for (const auto& l : live) {
      ForestNode r;
      r.t = q.floor;
      r.x = l.x1;
      r.left = l.node;
      r.lo = F.nodes[l.node].lo;
      r.hi = F.nodes[l.node].hi;
      int id = static_cast<int>(F.nodes.size());
      F.nodes.push_back(r);
      F.nodes[l.node].parent = id;
      F.roots.push_back(id);
    }
  } else {
    for (const auto& l : live) F.roots.push_back(l.node);
    F.end_time = s;
  }
  return F;
}

// Values at the leaves. Fixed-ic mode adds the initial condition at the
// root positions; the other modes return values relative to the root.
inline std::vector<double> evaluate_bc(const CoalescenceForest& F, const StepFunction& ic, Stream& rng) {
  std::vector<double> val(F.nodes.size(), 0.0);
  std::vector<char> is_root(F.nodes.size(), 0);
  for (int r : F.roots) {
    is_root[r] = 1;
    if (F.mode == Mode::FixedIC) {
      if (F.nodes[r].left < 0 && r >= F.k) throw InputError("evaluate_bc: unlabeled root");
      val[r] = ic(F.nodes[r].x);
    }
  }
  for (int v = static_cast<int>(F.nodes.size()) - 1; v >= 0; --v) {
    int p = F.nodes[v].parent;
    if (p < 0) {
      if (!is_root[v]) throw InputError("evaluate_bc: dangling node");
      continue;
    }
    double len = F.nodes[v].t - F.nodes[p].t;
    val[v] = val[p] + (len > 0 ? std::sqrt(len) * rng.normal() : 0.0);
  }
  return {val.begin(), val.begin() + F.k};
}

// H(x_i) - H(x_0) for the stationary castle at time 0.
inline std::vector<double> stationary_increments(const std::vector<double>& xs, const SamplerConfig& cfg, Stream& rng,
                                                 Mode mode = Mode::Stationary, double period = 0) {
  if (xs.size() < 2) throw InputError("stationary_increments: need >= 2 points");
  BCQuery q;
  q.mode = mode;
  q.period = period;
  for (double x : xs) q.points.push_back({0.0, x});
  // identical points share their ancestry from the start
  std::vector<double> uniq = xs;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() == 1) return std::vector<double>(xs.size() - 1, 0.0);
  auto F = sample_coalescing_forest(q, cfg, rng);
  auto v = evaluate_bc(F, q.ic, rng);
  std::vector<double> out;
  for (std::size_t i = 1; i < v.size(); ++i) out.push_back(v[i] - v[0]);
  return out;
}

struct Slice {
  std::vector<double> x, h;
  int distinct_ancestors = 0;

  StepFunction as_step() const {
    // constant on [x_i, x_{i+1}); right limits at jumps
    StepFunction f;
    f.vals = {h.empty() ? 0.0 : h.front()};
    for (std::size_t i = 1; i < x.size(); ++i)
      if (h[i] != h[i - 1]) {
        f.jumps.push_back(x[i]);
        f.vals.push_back(h[i]);
      }
    return f;
  }
};

inline std::vector<double> grid(double a, double b, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = n == 1 ? 0.5 * (a + b) : a + (b - a) * i / (n - 1);
  return g;
}

// h(t, .) on n equispaced points of [-R, R].
inline Slice bc_slice(double t, double R, int n, const StepFunction& ic, const SamplerConfig& cfg, Stream& rng) {
  if (!(t > 0)) throw InputError("bc_slice: t must be positive");
  if (n < 1) throw InputError("bc_slice: n >= 1");
  BCQuery q;
  q.ic = ic;
  for (double x : grid(-R, R, n)) q.points.push_back({t, x});
  auto F = sample_coalescing_forest(q, cfg, rng);
  Slice s;
  for (const auto& p : q.points) s.x.push_back(p.x);
  s.h = evaluate_bc(F, ic, rng);
  s.distinct_ancestors = static_cast<int>(F.roots.size());
  return s;
}

// Number of distinct ancestors at elapsed times eps of paths started from
// n equispaced points on {t} x [-R, R]; counts[e][r] restricts the start
// points to [-Rs[r], Rs[r]] (same run, so the counts are coupled).
struct PointCounts {
  std::vector<double> eps, Rs;
  std::vector<std::vector<int>> counts;
};

inline PointCounts coalescing_point_counts(double t, std::vector<double> eps, double R, int n, std::vector<double> Rs,
                                           SamplerConfig cfg, Stream& rng) {
  std::sort(eps.begin(), eps.end());
  if (eps.empty() || !(eps.front() > 0)) throw InputError("coalescing_point_counts: eps must be positive");
  if (eps.back() > t) throw InputError("coalescing_point_counts: eps beyond t");
  BCQuery q;
  q.floor = t - eps.back();
  auto xs = grid(-R, R, n);
  for (double x : xs) q.points.push_back({t, x});
  cfg.snapshots = eps;
  auto F = sample_coalescing_forest(q, cfg, rng);
  PointCounts pc{eps, Rs, {}};
  for (std::size_t e = 0; e < eps.size(); ++e) {
    std::vector<int> row;
    for (double r : Rs) {
      // ranks whose start point lies in [-r, r]
      int lo = static_cast<int>(std::lower_bound(xs.begin(), xs.end(), -r - 1e-12) - xs.begin());
      int hi = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), r + 1e-12) - xs.begin()) - 1;
      int c = 0;
      for (auto [a, b] : F.snapshots[e]) c += (b >= lo && a <= hi);
      row.push_back(c);
    }
    pc.counts.push_back(row);
  }
  return pc;
}

inline int coalescing_point_count(double t, double eps, double R, int n, const SamplerConfig& cfg, Stream& rng) {
  return coalescing_point_counts(t, {eps}, R, n, {R}, cfg, rng).counts[0][0];
}

// First time n equispaced backward paths on the circle of length L are all merged.
inline double periodic_coalescence_time(double L, int n, const SamplerConfig& cfg, Stream& rng) {
  if (n < 1) throw InputError("periodic_coalescence_time: n >= 1");
  if (n == 1) return 0.0;
  BCQuery q;
  q.mode = Mode::Periodic;
  q.period = L;
  for (int i = 0; i < n; ++i) q.points.push_back({0.0, L * i / n});
  auto F = sample_coalescing_forest(q, cfg, rng);
  return -F.end_time;
}

// sup over partitions of sum |f(b) - f(a)|^p for a sequence of values (a
// step function sampled at its pieces). Exact: the optimum uses only the
// alternating local extrema, and a DP over those is exhaustive.
inline double p_variation(const std::vector<double>& v, double p) {
  if (!(p > 0)) throw InputError("p_variation: p must be positive");
  std::vector<double> e;
  for (double x : v)
    if (e.empty() || x != e.back()) e.push_back(x);
  if (e.size() < 2) return 0.0;
  if (p <= 1.0) {
    // for p <= 1 every jump is its own block
    double s = 0;
    for (std::size_t i = 1; i < e.size(); ++i) s += std::pow(std::abs(e[i] - e[i - 1]), p);
    return s;
  }
  std::vector<double> m{e[0]};
  for (std::size_t i = 1; i + 1 < e.size(); ++i)
    if ((e[i] - e[i - 1]) * (e[i + 1] - e[i]) < 0) m.push_back(e[i]);
  m.push_back(e.back());
  std::vector<double> best(m.size(), 0.0);
  for (std::size_t i = 1; i < m.size(); ++i) {
    double b = 0;
    for (std::size_t j = 0; j < i; ++j) b = std::max(b, best[j] + std::pow(std::abs(m[i] - m[j]), p));
    best[i] = b;
  }
  return *std::max_element(best.begin(), best.end());
}

inline double p_variation(const StepFunction& f, double p) { return p_variation(f.vals, p); }

}  // namespace bcastle
