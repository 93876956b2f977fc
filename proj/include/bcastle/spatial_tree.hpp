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

// Spatial trees: a finite rooted tree plus a space-time evaluation map,
// with the compact spatial-tree distance over correspondences, the
// properness map, an M1 estimator, the subtree coupling iteration and the
// path correspondence between trimmed balls.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bcastle/errors.hpp"
#include "bcastle/rng.hpp"
#include "bcastle/rtree.hpp"

namespace bcastle {

struct Knot {
  double s = 0;  // offset from the child end (root edge: height above the root)
  double t = 0;
  double x = 0;
};

struct SpaceTime {
  double t = 0, x = 0;
};

inline double norm2(double a, double b) { return std::hypot(a, b); }

// orient = +1: backward tree, time decreases toward the open end
// (M_t = t_root + depth). orient = -1: forward tree (M_t = t_root - depth).
class SpatialTree {
 public:
  SpatialTree() = default;
  SpatialTree(FiniteRTree tree, int orient, double t_root, std::vector<std::vector<Knot>> knots)
      : tree_(std::move(tree)), orient_(orient), t_root_(t_root), knots_(std::move(knots)) {
    if (orient_ != 1 && orient_ != -1) throw InputError("spatial tree: orient must be +1 or -1");
    if (static_cast<int>(knots_.size()) != tree_.size()) throw InputError("spatial tree: one knot list per edge");
    for (int v = 0; v < tree_.size(); ++v) {
      auto& k = knots_[v];
      if (k.empty()) throw InputError("spatial tree: edge without knots");
      std::sort(k.begin(), k.end(), [](const Knot& a, const Knot& b) { return a.s < b.s; });
    }
  }

  // Builds the time coordinate from depth; xs[v] lists (s, x) per edge.
  static SpatialTree from_x(FiniteRTree tree, int orient, double t_root,
                            const std::vector<std::vector<std::pair<double, double>>>& xs) {
    std::vector<std::vector<Knot>> k(tree.size());
    for (int v = 0; v < tree.size(); ++v)
      for (auto [s, x] : xs.at(v)) {
        double depth = v == tree.root() ? -s : tree.node_depth(v) - s;
        k[v].push_back({s, t_root + orient * depth, x});
      }
    return SpatialTree(std::move(tree), orient, t_root, std::move(k));
  }

  // Straight-line embedding: x interpolates linearly between node positions.
  static SpatialTree linear(FiniteRTree tree, int orient, double t_root, const std::vector<double>& node_x,
                            double ray_x_end) {
    std::vector<std::vector<std::pair<double, double>>> xs(tree.size());
    for (int v = 0; v < tree.size(); ++v) {
      if (v == tree.root()) {
        xs[v].push_back({0.0, node_x.at(v)});
        if (tree.ray() > 0) xs[v].push_back({tree.ray(), ray_x_end});
      } else {
        xs[v].push_back({0.0, node_x.at(v)});
        xs[v].push_back({tree.length(v), node_x.at(tree.parent(v))});
      }
    }
    return from_x(std::move(tree), orient, t_root, xs);
  }

  const FiniteRTree& tree() const { return tree_; }
  int orient() const { return orient_; }
  double t_root() const { return t_root_; }
  const std::vector<Knot>& knots(int v) const { return knots_.at(v); }
  std::vector<Knot>& mutable_knots(int v) { return knots_.at(v); }

  SpaceTime eval(const Locus& z0) const {
    Locus z = tree_.canon(z0);
    const auto& k = knots_[z.edge];
    double s = z.off;
    if (s <= k.front().s || k.size() == 1) return {k.front().t, k.front().x};
    if (s >= k.back().s) return {k.back().t, k.back().x};
    auto it = std::lower_bound(k.begin(), k.end(), s, [](const Knot& a, double v) { return a.s < v; });
    const Knot &b = *it, &a = *(it - 1);
    double w = b.s > a.s ? (s - a.s) / (b.s - a.s) : 1.0;
    return {a.t + w * (b.t - a.t), a.x + w * (b.x - a.x)};
  }

  double depth_at_time(double t) const { return orient_ * (t - t_root_); }
  double nominal_time(const Locus& z) const { return t_root_ + orient_ * tree_.depth(z); }

  // Point at time s on the ray from z toward the open end.
  Locus radial(const Locus& z, double s) const {
    double dz = tree_.depth(z), target = depth_at_time(s);
    if (target > dz + 1e-12 * std::max(1.0, std::abs(dz))) throw RangeError("radial: time on the wrong side of z");
    return tree_.up(z, std::max(0.0, dz - target));
  }

  nlohmann::json to_json() const {
    auto j = tree_.to_json();
    j["orient"] = orient_;
    j["t_root"] = t_root_;
    nlohmann::json ev = nlohmann::json::array();
    for (int v = 0; v < tree_.size(); ++v) {
      nlohmann::json ks = nlohmann::json::array();
      for (const auto& k : knots_[v]) ks.push_back({{"s", k.s}, {"t", k.t}, {"x", k.x}});
      ev.push_back({{"edge", v}, {"knots", ks}});
    }
    j["eval"] = ev;
    return j;
  }

  static SpatialTree from_json(const nlohmann::json& j) {
    auto tree = FiniteRTree::from_json(j);
    std::vector<std::vector<Knot>> k(tree.size());
    for (const auto& e : j.at("eval"))
      for (const auto& q : e.at("knots"))
        k.at(e.at("edge").get<int>()).push_back({q.at("s").get<double>(), q.at("t").get<double>(), q.at("x").get<double>()});
    return SpatialTree(std::move(tree), j.value("orient", 1), j.value("t_root", 0.0), std::move(k));
  }

 private:
  FiniteRTree tree_;
  int orient_ = 1;
  double t_root_ = 0;
  std::vector<std::vector<Knot>> knots_;
};

// ---- characteristic checks ----

struct CharReport {
  double max_time_violation = 0;   // monotonicity in time
  double max_space_violation = 0;  // monotonicity in space
  int time_checks = 0, space_checks = 0;
  int violations = 0;  // checks above tolerance
};

inline Locus random_locus_any(const FiniteRTree& t, Stream& rng) {
  double total = t.total_length(true);
  if (total <= 0) return t.node(t.root());
  double u = rng.uniform() * total;
  for (int v = 0; v < t.size(); ++v) {
    double L = t.length(v);
    if (u <= L) return t.canon({v, v == t.root() ? u : u});
    u -= L;
  }
  return t.node(t.root());
}

// Loci whose nominal time is t, one per edge crossing that level.
inline std::vector<Locus> time_slice(const SpatialTree& z, double t) {
  const auto& tr = z.tree();
  double D = z.depth_at_time(t);
  std::vector<Locus> out;
  for (int v = 0; v < tr.size(); ++v) {
    if (v == tr.root()) {
      if (D <= 0 && -D <= tr.ray()) out.push_back(tr.canon({v, -D}));
      continue;
    }
    double lo = tr.node_depth(tr.parent(v)), hi = tr.node_depth(v);
    if (D > lo && D <= hi) out.push_back({v, hi - D});
  }
  return out;
}

inline CharReport check_characteristic(const SpatialTree& z, int samples, std::uint64_t seed, double tol = 1e-9) {
  CharReport rep;
  const auto& tr = z.tree();
  Stream rng(seed, 0x636861);
  for (int i = 0; i < samples; ++i) {
    Locus a = random_locus_any(tr, rng), b = random_locus_any(tr, rng);
    double d = tr.distance(a, b), s = rng.uniform();
    Locus m = tr.along(a, b, s * d);
    double ta = z.eval(a).t, tb = z.eval(b).t, tm = z.eval(m).t;
    double expect = z.orient() > 0 ? std::max(ta - s * d, tb - (1 - s) * d) : std::min(ta + s * d, tb + (1 - s) * d);
    double v = std::abs(tm - expect);
    rep.max_time_violation = std::max(rep.max_time_violation, v);
    rep.time_checks++;
    if (v > tol) rep.violations++;
  }
  // Spatial order of rays started at a common time is preserved toward the open end.
  double dmin = -tr.ray(), dmax = 0;
  for (int v = 0; v < tr.size(); ++v) dmax = std::max(dmax, tr.node_depth(v));
  if (dmax - dmin <= 0) return rep;
  for (int i = 0; i < samples; ++i) {
    double D1 = dmin + (dmax - dmin) * rng.uniform();
    double t1 = z.t_root() + z.orient() * D1;
    auto sl = time_slice(z, t1);
    if (sl.size() < 2) continue;
    std::sort(sl.begin(), sl.end(), [&](const Locus& p, const Locus& q) { return z.eval(p).x < z.eval(q).x; });
    double D0 = dmin + (D1 - dmin) * rng.uniform();
    for (std::size_t k = 0; k + 1 < sl.size(); ++k) {
      for (int j = 0; j <= 4; ++j) {
        double D = D0 + (D1 - D0) * j / 4.0;
        double xa = z.eval(tr.at_depth(sl[k], D)).x, xb = z.eval(tr.at_depth(sl[k + 1], D)).x;
        double v = std::max(0.0, xa - xb);
        rep.max_space_violation = std::max(rep.max_space_violation, v);
        rep.space_checks++;
        if (v > tol) rep.violations++;
      }
    }
  }
  return rep;
}

// ---- properness map and M1 ----

// Nondecreasing right-continuous step function: value b[i] on [r[i], r[i+1]),
// 0 before r[0].
struct PropernessMap {
  std::vector<double> r, b;

  double operator()(double x) const {
    auto it = std::upper_bound(r.begin(), r.end(), x);
    if (it == r.begin()) return 0.0;
    return b[static_cast<std::size_t>(it - r.begin()) - 1];
  }
  void validate() const {
    if (r.size() != b.size()) throw InputError("properness map: size mismatch");
    for (std::size_t i = 1; i < r.size(); ++i) {
      if (!(r[i] > r[i - 1])) throw InputError("properness map: breakpoints must increase");
      if (b[i] < b[i - 1]) throw InputError("properness map: values must be nondecreasing");
    }
    if (!r.empty() && b.front() < 0) throw InputError("properness map: negative value");
  }
};

// Largest root distance over points mapped into [-r, r]^2, exact on the
// piecewise-linear evaluation.
inline double properness_at(const SpatialTree& z, double r) {
  if (r < 0) return 0.0;
  const auto& tr = z.tree();
  double best = 0;
  for (int v = 0; v < tr.size(); ++v) {
    const auto& k = z.knots(v);
    auto depth = [&](double s) { return v == tr.root() ? -s : tr.node_depth(v) - s; };
    for (std::size_t i = 0; i < k.size(); ++i) {
      const Knot& a = k[i];
      const Knot& b = i + 1 < k.size() ? k[i + 1] : k[i];
      // clip lambda in [0,1] against |t| <= r and |x| <= r
      double lo = 0, hi = 1;
      auto clip = [&](double p0, double p1) {
        double dp = p1 - p0;
        if (std::abs(dp) < 1e-300) {
          if (std::abs(p0) > r) lo = 2;  // empty
          return;
        }
        double l1 = (-r - p0) / dp, l2 = (r - p0) / dp;
        if (l1 > l2) std::swap(l1, l2);
        lo = std::max(lo, l1);
        hi = std::min(hi, l2);
      };
      clip(a.t, b.t);
      clip(a.x, b.x);
      if (lo > hi + 1e-15) continue;
      for (double l : {lo, hi}) {
        double s = a.s + std::clamp(l, 0.0, 1.0) * (b.s - a.s);
        best = std::max(best, std::abs(depth(s)));
      }
    }
  }
  return best;
}

inline PropernessMap properness_map(const SpatialTree& z, const std::vector<double>& r_grid) {
  PropernessMap m;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (i && !(r_grid[i] > r_grid[i - 1])) throw InputError("properness_map: grid must increase");
    m.r.push_back(r_grid[i]);
    m.b.push_back(properness_at(z, r_grid[i]));
  }
  for (std::size_t i = 1; i < m.b.size(); ++i) m.b[i] = std::max(m.b[i], m.b[i - 1]);  // guards rounding
  return m;
}

// Vertices of the completed graph of f on [lo, hi].
inline std::vector<std::pair<double, double>> completed_graph(const PropernessMap& f, double lo, double hi) {
  std::vector<std::pair<double, double>> g{{lo, f(lo)}};
  for (std::size_t i = 0; i < f.r.size(); ++i) {
    double x = f.r[i];
    if (x <= lo || x > hi) continue;
    double before = f(std::nextafter(x, -1e300));
    g.push_back({x, before});
    g.push_back({x, f(x)});
  }
  g.push_back({hi, f(hi)});
  return g;
}

inline std::vector<std::pair<double, double>> resample(const std::vector<std::pair<double, double>>& poly, double h) {
  std::vector<std::pair<double, double>> out{poly.front()};
  for (std::size_t i = 1; i < poly.size(); ++i) {
    auto [x0, y0] = poly[i - 1];
    auto [x1, y1] = poly[i];
    double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
    int n = std::max(1, static_cast<int>(std::ceil(len / h)));
    for (int k = 1; k <= n; ++k) out.push_back({x0 + (x1 - x0) * k / n, y0 + (y1 - y0) * k / n});
  }
  return out;
}

// M1 distance of two nondecreasing step functions on [lo, hi], estimated as
// the discrete Frechet distance (max-norm) between resampled completed
// graphs. Exceeds the exact value by at most the resampling step h.
inline double m1_distance(const PropernessMap& f, const PropernessMap& g, double lo, double hi, double h = 1e-3) {
  f.validate();
  g.validate();
  if (!(hi > lo) || !(h > 0)) throw InputError("m1_distance: bad interval or step");
  auto P = resample(completed_graph(f, lo, hi), h), Q = resample(completed_graph(g, lo, hi), h);
  auto dist = [&](std::size_t i, std::size_t j) {
    return std::max(std::abs(P[i].first - Q[j].first), std::abs(P[i].second - Q[j].second));
  };
  std::vector<double> prev(Q.size()), cur(Q.size());
  for (std::size_t i = 0; i < P.size(); ++i) {
    for (std::size_t j = 0; j < Q.size(); ++j) {
      double d = dist(i, j);
      if (i == 0 && j == 0) cur[j] = d;
      else if (i == 0) cur[j] = std::max(cur[j - 1], d);
      else if (j == 0) cur[j] = std::max(prev[j], d);
      else cur[j] = std::max(std::min({prev[j], prev[j - 1], cur[j - 1]}), d);
    }
    std::swap(prev, cur);
  }
  return prev.back();
}

// ---- correspondences ----

struct Correspondence {
  std::vector<std::pair<Locus, Locus>> pairs;
  double mesh = 0;
  bool roots_paired = false;

  Correspondence inverse() const {
    Correspondence c{{}, mesh, roots_paired};
    for (const auto& [a, b] : pairs) c.pairs.push_back({b, a});
    return c;
  }
};

inline double distortion_of(const FiniteRTree& A, const FiniteRTree& B, const std::vector<std::pair<Locus, Locus>>& P) {
  double m = 0;
  for (std::size_t i = 0; i < P.size(); ++i)
    for (std::size_t j = i + 1; j < P.size(); ++j)
      m = std::max(m, std::abs(A.distance(P[i].first, P[j].first) - B.distance(P[i].second, P[j].second)));
  return m;
}

inline double distortion(const Correspondence& c, const SpatialTree& z, const SpatialTree& zp) {
  if (c.pairs.empty()) throw InputError("distortion: empty correspondence");
  return distortion_of(z.tree(), zp.tree(), c.pairs);
}

// Points along every edge and the ray at spacing <= mesh, nodes included.
inline std::vector<Locus> mesh_loci(const FiniteRTree& t, double mesh) {
  std::vector<Locus> out;
  for (int v : t.order()) {
    double L = t.length(v);
    if (v == t.root()) {
      out.push_back(t.node(v));
      if (L <= 0) continue;
    } else {
      out.push_back(t.node(v));
    }
    int n = std::max(1, static_cast<int>(std::ceil(L / mesh - 1e-9)));
    for (int k = 1; k < n; ++k) out.push_back({v, L * k / n});
    if (v == t.root()) out.push_back(t.ray_tip());
  }
  return out;
}

// Correspondence induced by node maps f: V -> V' and g: V' -> V (both
// sending root to root). Each edge (v, parent v) is matched with the segment
// between the images by arclength fraction; the ray with the ray.
inline Correspondence correspondence_from_maps(const FiniteRTree& A, const FiniteRTree& B, const std::vector<int>& f,
                                               const std::vector<int>& g, double mesh) {
  if (static_cast<int>(f.size()) != A.size() || static_cast<int>(g.size()) != B.size())
    throw InputError("correspondence: node map size mismatch");
  if (f[A.root()] != B.root() || g[B.root()] != A.root()) throw InputError("correspondence: roots must match");
  Correspondence c{{}, mesh, true};
  auto side = [&](const FiniteRTree& S, const FiniteRTree& T, const std::vector<int>& map, bool forward) {
    for (int v = 0; v < S.size(); ++v) {
      double L = S.length(v);
      int n = std::max(1, static_cast<int>(std::ceil(L / mesh - 1e-9)));
      for (int k = 0; k <= n; ++k) {
        double u = L > 0 ? static_cast<double>(k) / n : 0.0;
        Locus a, b;
        if (v == S.root()) {
          a = S.canon({v, u * S.ray()});
          b = T.canon({T.root(), u * T.ray()});
        } else {
          a = S.canon({v, u * L});
          Locus p = T.node(map[v]), q = T.node(map[S.parent(v)]);
          b = T.along(p, q, u * T.distance(p, q));
        }
        if (forward) c.pairs.push_back({a, b});
        else c.pairs.push_back({b, a});
        if (L <= 0) break;
      }
    }
  };
  side(A, B, f, true);
  side(B, A, g, false);
  return c;
}

inline Correspondence identity_correspondence(const FiniteRTree& A, double mesh) {
  std::vector<int> id(A.size());
  for (int v = 0; v < A.size(); ++v) id[v] = v;
  return correspondence_from_maps(A, A, id, id, mesh);
}

struct DeltaReport {
  double value = 0;
  double half_distortion = 0, eval_gap = 0, holder = 0, m1 = 0;
  std::vector<int> dropped_annuli;   // both sides empty
  std::vector<int> fallback_annuli;  // one side empty
};

inline int annulus_index(double d) {
  if (!(d > 0) || d > 1) return 0;
  int e;
  double m = std::frexp(d, &e);  // d = m 2^e, m in [0.5, 1)
  // d in (2^-n, 2^-(n-1)]  <=>  n = 1 - e, except exact powers of two.
  return m == 0.5 ? 2 - e : 1 - e;
}

inline DeltaReport delta_sp_compact(const SpatialTree& z, const SpatialTree& zp, const Correspondence& c, double alpha,
                                    bool with_m1 = false, double r_max = 0) {
  if (!(alpha > 0 && alpha < 1)) throw InputError("delta_sp_compact: alpha must lie in (0,1)");
  if (c.pairs.empty()) throw InputError("delta_sp_compact: empty correspondence");
  const auto &A = z.tree(), &B = zp.tree();
  double mesh = c.mesh > 0 ? c.mesh : 1e-3;
  int nmax = std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / mesh))));
  std::vector<double> both(nmax + 1, 0.0), onlyL(nmax + 1, 0.0), onlyR(nmax + 1, 0.0);
  std::vector<char> hasL(nmax + 1, 0), hasR(nmax + 1, 0);
  const auto& P = c.pairs;
  std::vector<SpaceTime> ea(P.size()), eb(P.size());
  DeltaReport rep;
  double dis = 0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    ea[i] = z.eval(P[i].first);
    eb[i] = zp.eval(P[i].second);
    rep.eval_gap = std::max(rep.eval_gap, norm2(ea[i].t - eb[i].t, ea[i].x - eb[i].x));
  }
  for (std::size_t i = 0; i < P.size(); ++i)
    for (std::size_t j = i + 1; j < P.size(); ++j) {
      double d = A.distance(P[i].first, P[j].first), dp = B.distance(P[i].second, P[j].second);
      dis = std::max(dis, std::abs(d - dp));
      int n = annulus_index(d), np = annulus_index(dp);
      double ml = norm2(ea[i].t - ea[j].t, ea[i].x - ea[j].x), mr = norm2(eb[i].t - eb[j].t, eb[i].x - eb[j].x);
      if (n >= 1 && n <= nmax) {
        hasL[n] = 1;
        onlyL[n] = std::max(onlyL[n], ml);
      }
      if (np >= 1 && np <= nmax) {
        hasR[np] = 1;
        onlyR[np] = std::max(onlyR[np], mr);
      }
      if (n == np && n >= 1 && n <= nmax) {
        double g = norm2((ea[i].t - ea[j].t) - (eb[i].t - eb[j].t), (ea[i].x - ea[j].x) - (eb[i].x - eb[j].x));
        both[n] = std::max(both[n], g);
      }
    }
  for (int n = 1; n <= nmax; ++n) {
    double term;
    if (!hasL[n] && !hasR[n]) {
      rep.dropped_annuli.push_back(n);
      continue;
    }
    if (!hasL[n]) {
      term = onlyR[n];
      rep.fallback_annuli.push_back(n);
    } else if (!hasR[n]) {
      term = onlyL[n];
      rep.fallback_annuli.push_back(n);
    } else {
      term = both[n];
    }
    rep.holder = std::max(rep.holder, std::pow(2.0, n * alpha) * term);
  }
  rep.half_distortion = 0.5 * dis;
  rep.value = rep.half_distortion + rep.eval_gap + rep.holder;
  if (with_m1) {
    std::vector<double> grid;
    double top = r_max > 0 ? r_max : 1.0;
    for (int i = 0; i <= 200; ++i) grid.push_back(top * i / 200.0);
    rep.m1 = m1_distance(properness_map(z, grid), properness_map(zp, grid), 0.0, top, top / 2000);
    rep.value += rep.m1;
  }
  return rep;
}

struct BestCorrespondence {
  Correspondence c;
  double value = 0;
  bool exhaustive = false;  // false: greedy, value is an upper bound
  std::vector<int> f, g;
};

// Node-level score of a pair of node maps.
inline double node_score(const SpatialTree& z, const SpatialTree& zp, const std::vector<int>& f,
                         const std::vector<int>& g) {
  const auto &A = z.tree(), &B = zp.tree();
  std::vector<std::pair<int, int>> P;
  for (int v = 0; v < A.size(); ++v) P.push_back({v, f[v]});
  for (int u = 0; u < B.size(); ++u) P.push_back({g[u], u});
  double dis = 0, gap = 0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    auto a = z.eval(A.node(P[i].first)), b = zp.eval(B.node(P[i].second));
    gap = std::max(gap, norm2(a.t - b.t, a.x - b.x));
    for (std::size_t j = i + 1; j < P.size(); ++j)
      dis = std::max(dis, std::abs(A.distance(A.node(P[i].first), A.node(P[j].first)) -
                                   B.distance(B.node(P[i].second), B.node(P[j].second))));
  }
  return 0.5 * dis + gap;
}

// Inverse-style completion: each node of B maps to the node of A that
// f sends closest to it (root to root).
inline std::vector<int> complete_inverse(const SpatialTree& z, const SpatialTree& zp, const std::vector<int>& f) {
  const auto &A = z.tree(), &B = zp.tree();
  std::vector<int> g(B.size(), A.root());
  for (int u = 0; u < B.size(); ++u) {
    if (u == B.root()) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int v = 0; v < A.size(); ++v) {
      double s = B.distance(B.node(f[v]), B.node(u)) +
                 std::abs(A.node_depth(v) - B.node_depth(u));
      if (s < best) best = s, g[u] = v;
    }
  }
  return g;
}

inline BestCorrespondence best_correspondence(const SpatialTree& z, const SpatialTree& zp, double alpha,
                                              long budget = 200000, double mesh = 0.02) {
  const auto &A = z.tree(), &B = zp.tree();
  auto full = [&](const std::vector<int>& f, const std::vector<int>& g) {
    auto c = correspondence_from_maps(A, B, f, g, mesh);
    return std::make_pair(c, delta_sp_compact(z, zp, c, alpha).value);
  };
  // greedy: nearest evaluation among nodes of B
  std::vector<int> fg(A.size(), B.root());
  for (int v = 0; v < A.size(); ++v) {
    if (v == A.root()) continue;
    auto a = z.eval(A.node(v));
    double best = std::numeric_limits<double>::infinity();
    for (int u = 0; u < B.size(); ++u) {
      auto b = zp.eval(B.node(u));
      double s = norm2(a.t - b.t, a.x - b.x);
      if (s < best) best = s, fg[v] = u;
    }
  }
  auto gg = complete_inverse(z, zp, fg);
  auto [cg, vg] = full(fg, gg);
  BestCorrespondence out{cg, vg, false, fg, gg};

  double count = std::pow(static_cast<double>(B.size()), A.size() - 1);
  if (A.size() > 8 || B.size() > 8 || count > static_cast<double>(budget)) return out;

  struct Cand {
    double score;
    std::vector<int> f, g;
  };
  std::vector<Cand> top;
  const std::size_t keep = 8;
  std::vector<int> f(A.size(), B.root());
  std::vector<int> free;
  for (int v = 0; v < A.size(); ++v)
    if (v != A.root()) free.push_back(v);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == free.size()) {
      auto g = complete_inverse(z, zp, f);
      double s = node_score(z, zp, f, g);
      if (top.size() < keep || s < top.back().score) {
        top.push_back({s, f, g});
        std::sort(top.begin(), top.end(), [](const Cand& a, const Cand& b) { return a.score < b.score; });
        if (top.size() > keep) top.pop_back();
      }
      return;
    }
    for (int u = 0; u < B.size(); ++u) {
      f[free[i]] = u;
      rec(i + 1);
    }
  };
  rec(0);
  out.exhaustive = true;
  for (const auto& cd : top) {
    auto [c, v] = full(cd.f, cd.g);
    if (v < out.value) out = {c, v, true, cd.f, cd.g};
  }
  return out;
}

// ---- subtree coupling ----

// Root-connected subtree grown by attaching segments; edge v keeps offsets
// [cut[v], len(v)] (cut < 0: absent), the ray keeps [0, ray_keep].
class GrowingSubtree {
 public:
  explicit GrowingSubtree(const FiniteRTree& t) : t_(&t), cut_(t.size(), -1.0) {}

  // Nearest point of the subtree to z.
  Locus project(const Locus& z0) const {
    const auto& t = *t_;
    Locus z = t.canon(z0);
    if (z.edge == t.root()) return t.canon({z.edge, std::min(z.off, ray_keep_)});
    while (z.edge != t.root()) {
      double c = cut_[z.edge];
      if (c >= 0) return z.off >= c - 1e-15 ? z : Locus{z.edge, c};
      z = {t.parent(z.edge), 0.0};
    }
    return t.node(t.root());
  }
  double distance(const Locus& z) const { return t_->distance(z, project(z)); }

  // Adds the segment [b, v] where b is the projection of v.
  void add(const Locus& v0) {
    const auto& t = *t_;
    Locus v = t.canon(v0);
    if (v.edge == t.root()) {
      ray_keep_ = std::max(ray_keep_, v.off);
      return;
    }
    cut_[v.edge] = cut_[v.edge] < 0 ? v.off : std::min(cut_[v.edge], v.off);
    for (int e = t.parent(v.edge); e != t.root() && e >= 0; e = t.parent(e)) {
      if (cut_[e] == 0) break;
      cut_[e] = 0;
    }
  }

  double hausdorff() const {
    double h = 0;
    for (const auto& e : t_->endpoints()) h = std::max(h, distance(e));
    return h;
  }
  // Farthest endpoint from the subtree.
  std::pair<Locus, double> farthest() const {
    Locus best = t_->node(t_->root());
    double bd = -1;
    for (const auto& e : t_->endpoints()) {
      double d = distance(e);
      if (d > bd) bd = d, best = e;
    }
    return {best, std::max(bd, 0.0)};
  }
  SubTree materialize() const { return restrict_by_cuts(*t_, cut_, ray_keep_); }
  double length() const {
    double s = ray_keep_;
    for (int v = 0; v < t_->size(); ++v)
      if (v != t_->root() && cut_[v] >= 0) s += t_->length(v) - cut_[v];
    return s;
  }

 private:
  const FiniteRTree* t_;
  std::vector<double> cut_;
  double ray_keep_ = 0;
};

struct CouplingStep {
  Locus v, b, vp, bp;  // v_m, b_m and their images
  double ell = 0;      // l_m
  double d_vb = 0;     // distance from the chosen farthest point to T_{m-1}
  double dis_before = 0, dis_with_new = 0;  // dis C_{m-1} and with (v_m,v'_m),(b_m,b'_m)
};

struct CouplingResult {
  SubTree T, Tp;
  std::vector<CouplingStep> log;
  int N = 0;
  double final_distortion = 0;
  double hausdorff_T = 0, hausdorff_Tp = 0;
  double halt_distance = 0;
  double phi_distortion = 0;
  bool ell_ok = true, length_ok = true, hausdorff_ok = true, growth_ok = true;
  double max_growth = 0;
};

inline CouplingResult couple_subtrees(const SpatialTree& z, const SpatialTree& zp, const Correspondence& c, double eta,
                                      double phi_mesh = 0.05, int max_steps = 1000) {
  if (!(eta > 0)) throw InputError("couple_subtrees: eta must be positive");
  const auto &A = z.tree(), &B = zp.tree();
  if (c.pairs.empty()) throw InputError("couple_subtrees: empty correspondence");
  // coverage of every endpoint on both sides
  auto covered = [&](const FiniteRTree& S, bool first) {
    for (const auto& e : S.endpoints()) {
      bool ok = false;
      for (const auto& p : c.pairs)
        if (S.same(first ? p.first : p.second, e)) {
          ok = true;
          break;
        }
      if (!ok) return false;
    }
    return true;
  };
  if (!covered(A, true) || !covered(B, false)) throw InputError("couple_subtrees: correspondence misses an endpoint");

  CouplingResult res;
  GrowingSubtree T(A), Tp(B);
  std::vector<std::pair<Locus, Locus>> pairs = c.pairs;
  pairs.push_back({A.node(A.root()), B.node(B.root())});
  std::vector<std::pair<Locus, Locus>> phi{{A.node(A.root()), B.node(B.root())}};
  double dis = distortion_of(A, B, pairs);
  auto extra_dis = [&](const std::vector<std::pair<Locus, Locus>>& add) {
    double m = 0;
    for (std::size_t i = 0; i < add.size(); ++i) {
      for (const auto& p : pairs)
        m = std::max(m, std::abs(A.distance(add[i].first, p.first) - B.distance(add[i].second, p.second)));
      for (std::size_t j = i + 1; j < add.size(); ++j)
        m = std::max(m, std::abs(A.distance(add[i].first, add[j].first) - B.distance(add[i].second, add[j].second)));
    }
    return m;
  };
  for (int m = 1; m <= max_steps; ++m) {
    auto [v, dvb] = T.farthest();
    if (dvb <= 2 * std::max(eta, dis) + 1e-12) {
      res.halt_distance = dvb;
      break;
    }
    Locus b = T.project(v);
    Locus vprime;
    for (const auto& p : c.pairs)
      if (A.same(p.first, v)) {
        vprime = p.second;
        break;
      }
    Locus bprime = Tp.project(vprime);
    double dp = B.distance(vprime, bprime);
    CouplingStep st;
    st.d_vb = dvb;
    st.dis_before = dis;
    if (dvb >= dp) {
      st.vp = B.canon(vprime);
      st.v = A.along(b, v, dp);
      st.ell = dp;
    } else {
      st.v = A.canon(v);
      st.vp = B.along(bprime, vprime, dvb);
      st.ell = dvb;
    }
    st.b = b;
    st.bp = bprime;
    st.dis_with_new = std::max(dis, extra_dis({{st.v, st.vp}, {st.b, st.bp}}));
    if (st.ell < eta / 2 - 1e-12) res.ell_ok = false;
    if (std::abs(A.distance(st.b, st.v) - B.distance(st.bp, st.vp)) > 1e-9) res.length_ok = false;
    if (dis > 0) res.max_growth = std::max(res.max_growth, st.dis_with_new / dis);
    else if (st.dis_with_new > 1e-12) res.growth_ok = false;
    // phi on the new segment, sampled
    std::vector<std::pair<Locus, Locus>> seg;
    int n = std::max(1, static_cast<int>(std::ceil(st.ell / phi_mesh)));
    for (int k = 0; k <= n; ++k) {
      double u = st.ell * k / n;
      seg.push_back({A.along(st.b, st.v, u), B.along(st.bp, st.vp, u)});
    }
    dis = std::max(dis, extra_dis(seg));
    pairs.insert(pairs.end(), seg.begin(), seg.end());
    phi.insert(phi.end(), seg.begin(), seg.end());
    T.add(st.v);
    Tp.add(st.vp);
    res.log.push_back(st);
    res.N = m;
  }
  if (res.max_growth > 4.5 + 1e-9) res.growth_ok = false;
  res.final_distortion = dis;
  res.T = T.materialize();
  res.Tp = Tp.materialize();
  res.hausdorff_T = T.hausdorff();
  res.hausdorff_Tp = Tp.hausdorff();
  res.phi_distortion = distortion_of(A, B, phi);
  res.hausdorff_ok = res.hausdorff_T <= 2 * std::max(eta, res.final_distortion) + 1e-9;
  return res;
}

// ---- path correspondence ----

struct PathCorrespondence {
  Correspondence cp;
  SubTree T1, T2;            // as subtrees of the input trees
  SubTree trimmed1, trimmed2;  // the trimmed r-balls
  int N = 0;                 // endpoints of the first trimmed ball
  double eps = 0;            // Delta of the given correspondence on the trimmed balls
  double dis = 0, eval_gap = 0, holder_norm = 0;
  double bound = 0;          // 4 N eps + |M_1|_alpha eps^alpha
  bool bound_ok = false;
  bool incl_ok = false;      // R_{eta+eps}(ball) in T1 in trimmed ball
  double hausdorff1 = 0;
};

// Holder seminorm of the evaluation map over a point set.
inline double holder_seminorm(const SpatialTree& z, const std::vector<Locus>& pts, double alpha) {
  double h = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto a = z.eval(pts[i]);
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double d = z.tree().distance(pts[i], pts[j]);
      if (d <= 1e-12) continue;
      auto b = z.eval(pts[j]);
      h = std::max(h, norm2(a.t - b.t, a.x - b.x) / std::pow(d, alpha));
    }
  }
  return h;
}

// Trimmed ball R_eta(ball(r) + the ray up to r + eta), as a subtree.
inline SubTree trimmed_ball(const FiniteRTree& t, double r, double eta) {
  std::vector<double> cut(t.size(), -1.0);
  for (int v = 0; v < t.size(); ++v) {
    if (v == t.root()) continue;
    double dp = t.node_depth(t.parent(v));
    if (dp >= r) continue;
    cut[v] = std::max(0.0, t.node_depth(v) - r);
  }
  if (t.ray() < r + eta - 1e-12) throw RangeError("trimmed_ball: ray shorter than r + eta");
  SubTree ext = restrict_by_cuts(t, cut, r + eta);
  return compose(t, ext, trim(ext.tree, eta));
}

inline PathCorrespondence path_correspondence(const SpatialTree& z1, const SpatialTree& z2, const Correspondence& c,
                                              double r, double eta, double alpha = 0.5, double mesh = 0.02) {
  if (z1.orient() != -1 || z2.orient() != -1) throw InputError("path_correspondence: forward trees required");
  if (std::abs(z1.eval(z1.tree().node(z1.tree().root())).t) > 1e-9 ||
      std::abs(z2.eval(z2.tree().node(z2.tree().root())).t) > 1e-9)
    throw InputError("path_correspondence: roots must sit at time 0");
  const auto &A = z1.tree(), &B = z2.tree();
  PathCorrespondence out;
  out.trimmed1 = trimmed_ball(A, r, eta);
  out.trimmed2 = trimmed_ball(B, r, eta);
  std::vector<Locus> ends1, ends2;
  for (const auto& e : out.trimmed1.tree.endpoints()) ends1.push_back(out.trimmed1.to_original(A, e));
  for (const auto& e : out.trimmed2.tree.endpoints()) ends2.push_back(out.trimmed2.to_original(B, e));
  if (ends1.size() != ends2.size())
    throw StructuralError("path_correspondence: trimmed balls have " + std::to_string(ends1.size()) + " and " +
                          std::to_string(ends2.size()) + " endpoints");
  out.N = static_cast<int>(ends1.size());

  // the given correspondence restricted to the trimmed balls
  auto inside = [&](const FiniteRTree& T, const SubTree& s, const Locus& p) {
    return distance_to_subtree(T, s, p) <= 1e-9;
  };
  Correspondence cr{{}, c.mesh, c.roots_paired};
  for (const auto& p : c.pairs)
    if (inside(A, out.trimmed1, p.first) && inside(B, out.trimmed2, p.second)) cr.pairs.push_back(p);
  if (cr.pairs.empty()) throw InputError("path_correspondence: correspondence misses the trimmed balls");
  out.eps = delta_sp_compact(z1, z2, cr, alpha).value;

  std::vector<Locus> v1{A.node(A.root())}, v2{B.node(B.root())};
  for (const auto& e : ends1) {
    const std::pair<Locus, Locus>* best = nullptr;
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& p : cr.pairs) {
      double d = A.distance(p.first, e);
      if (d < bd) bd = d, best = &p;
    }
    Locus a = e, b = best->second;
    double ta = z1.eval(a).t, tb = z2.eval(b).t;
    if (ta >= tb) b = z2.radial(b, ta);
    else a = z1.radial(a, tb);
    v1.push_back(a);
    v2.push_back(b);
  }
  GrowingSubtree g1(A), g2(B);
  Locus top1 = z1.radial(A.node(A.root()), r), top2 = z2.radial(B.node(B.root()), r);
  g1.add(top1);
  g2.add(top2);
  for (std::size_t i = 0; i < v1.size(); ++i) {
    g1.add(v1[i]);
    g2.add(v2[i]);
  }
  out.T1 = g1.materialize();
  out.T2 = g2.materialize();
  out.cp.mesh = mesh;
  out.cp.roots_paired = true;
  for (std::size_t i = 0; i < v1.size(); ++i) {
    double t0 = z1.eval(v1[i]).t;
    int n = std::max(1, static_cast<int>(std::ceil((r - t0) / mesh)));
    for (int k = 0; k <= n; ++k) {
      double t = t0 + (r - t0) * k / n;
      out.cp.pairs.push_back({z1.radial(v1[i], t), z2.radial(v2[i], t)});
    }
  }
  out.dis = distortion_of(A, B, out.cp.pairs);
  for (const auto& [a, b] : out.cp.pairs) {
    auto ea = z1.eval(a), eb = z2.eval(b);
    out.eval_gap = std::max(out.eval_gap, norm2(ea.t - eb.t, ea.x - eb.x));
  }
  std::vector<Locus> pts;
  for (const auto& e : mesh_loci(out.trimmed1.tree, mesh)) pts.push_back(out.trimmed1.to_original(A, e));
  out.holder_norm = holder_seminorm(z1, pts, alpha);
  out.bound = 4 * out.N * out.eps + out.holder_norm * std::pow(out.eps, alpha);
  out.bound_ok = out.dis + out.eval_gap <= out.bound + 1e-9;
  SubTree b1 = ball(A, r);
  SubTree inner = compose(A, b1, trim(b1.tree, eta + out.eps));
  out.incl_ok = subtree_included(A, inner, out.T1) && subtree_included(A, out.T1, out.trimmed1);
  out.hausdorff1 = 0;
  for (const auto& e : ends1) out.hausdorff1 = std::max(out.hausdorff1, distance_to_subtree(A, out.T1, e));
  return out;
}

}  // namespace bcastle
