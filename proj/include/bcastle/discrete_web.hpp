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

// The 0-BD / beta-BD models through their graphical representation:
// Poisson event streams on a lattice window, coalescing backward walks and
// dual forward walks, the web tree spanned by finitely many backward walks,
// and the rescaled compensated dot count on that tree.
//
// Units: gamma = 1/(2 delta^2); left and right arrows have rate gamma per
// site, dots 2 gamma. A left arrow at site x at time s sets h(x) = h(x+1),
// so the backward walk at x moves to x+1; a right arrow moves it to x-1; a
// dot adds one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "json.hpp"

#include "bcastle/errors.hpp"
#include "bcastle/rng.hpp"
#include "bcastle/rtree.hpp"
#include "bcastle/spatial_tree.hpp"

namespace bcastle {

enum class EventKind : std::uint8_t { Left = 0, Right = 1, Dot = 2 };

inline const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::Left: return "L";
    case EventKind::Right: return "R";
    default: return "dot";
  }
}

struct Event {
  double t = 0;
  EventKind kind = EventKind::Dot;
  double mark = 0;  // uniform, drives the Gibbs choice at positive beta
};

struct WebWindow {
  double t0 = 0, t1 = 1;
  long site_lo = -10, site_hi = 10;
};

// Events are generated lazily per (site, time block) from counter-based
// streams, so the realization on a window does not depend on the window:
// enlarging it keeps every event already seen.
class EventField {
 public:
  EventField(double delta, WebWindow w, std::uint64_t seed, long periodic = 0)
      : delta_(delta), gamma_(1.0 / (2 * delta * delta)), w_(w), seed_(seed), periodic_(periodic) {
    if (!(delta > 0 && delta <= 1)) throw InputError("event field: delta must lie in (0,1]");
    if (!(w.t1 > w.t0) || (periodic == 0 && w.site_hi < w.site_lo)) throw InputError("event field: empty window");
    if (periodic < 0) throw InputError("event field: negative period");
    block_ = 1.0 / gamma_;
  }

  double delta() const { return delta_; }
  double gamma() const { return gamma_; }
  const WebWindow& window() const { return w_; }
  std::uint64_t seed() const { return seed_; }
  long periodic() const { return periodic_; }
  double block_length() const { return block_; }

  long wrap(long site) const {
    if (periodic_ == 0) return site;
    long r = site % periodic_;
    return r < 0 ? r + periodic_ : r;
  }
  bool site_inside(long site) const { return periodic_ != 0 || (site >= w_.site_lo && site <= w_.site_hi); }
  long site_count() const { return periodic_ ? periodic_ : w_.site_hi - w_.site_lo + 1; }
  long first_site() const { return periodic_ ? 0 : w_.site_lo; }

  long block_of(double t) const { return static_cast<long>(std::floor(t / block_)); }

  // Events of one block, sorted by time; times strictly distinct.
  std::vector<Event> block(long site, long b) const {
    std::uint64_t s = static_cast<std::uint64_t>(wrap(site)), bb = static_cast<std::uint64_t>(b);
    for (std::uint64_t attempt = 0;; ++attempt) {
      Stream rng(make_key({seed_, 0x45564e54ULL, s, bb, attempt}));
      auto n = rng.poisson(4.0);  // total rate 4 gamma over a block of length 1/gamma
      std::vector<Event> ev(n);
      for (auto& e : ev) {
        e.t = (static_cast<double>(b) + rng.uniform()) * block_;
        double u = rng.uniform();
        e.kind = u < 0.25 ? EventKind::Left : (u < 0.5 ? EventKind::Right : EventKind::Dot);
        e.mark = rng.uniform();
      }
      std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& c) { return a.t < c.t; });
      bool dup = false;
      for (std::size_t i = 1; i < ev.size(); ++i) dup |= ev[i].t == ev[i - 1].t;
      if (!dup) return ev;
    }
  }

  // Events at a site with time in (a, b], sorted.
  std::vector<Event> events(long site, double a, double b) const {
    std::vector<Event> out;
    if (!(b > a)) return out;
    for (long k = block_of(a); k <= block_of(b); ++k)
      for (const auto& e : block(site, k))
        if (e.t > a && e.t <= b) out.push_back(e);
    return out;
  }

  long dots(long site, double a, double b) const {
    long c = 0;
    for (const auto& e : events(site, a, b)) c += e.kind == EventKind::Dot;
    return c;
  }

  // Latest arrow at `site` with floor < time < s.
  std::optional<Event> prev_arrow(long site, double s, double floor) const {
    for (long k = block_of(s); k >= block_of(floor); --k) {
      auto ev = block(site, k);
      for (auto it = ev.rbegin(); it != ev.rend(); ++it) {
        if (it->t >= s || it->kind == EventKind::Dot) continue;
        if (it->t <= floor) return std::nullopt;
        return *it;
      }
    }
    return std::nullopt;
  }

  // Earliest event of kind `k` at `site` with s < time <= ceil.
  std::optional<Event> next_of(long site, EventKind kind, double s, double ceil) const {
    for (long k = block_of(s); k <= block_of(ceil); ++k)
      for (const auto& e : block(site, k)) {
        if (e.t <= s || e.kind != kind) continue;
        if (e.t > ceil) return std::nullopt;
        return e;
      }
    return std::nullopt;
  }
  std::optional<double> next_arrow_time(long site, double s, double ceil) const {
    auto l = next_of(site, EventKind::Left, s, ceil), r = next_of(site, EventKind::Right, s, ceil);
    if (l && r) return std::min(l->t, r->t);
    if (l) return l->t;
    if (r) return r->t;
    return std::nullopt;
  }

  // One JSON line per event inside the window: {site, t, kind}.
  void write_jsonl(std::ostream& os) const {
    for (long k = first_site(); k < first_site() + site_count(); ++k)
      for (const auto& e : events(k, w_.t0, w_.t1))
        os << nlohmann::json{{"site", k}, {"t", e.t}, {"kind", kind_name(e.kind)}}.dump() << '\n';
  }

 private:
  double delta_, gamma_;
  WebWindow w_;
  std::uint64_t seed_;
  long periodic_;
  double block_ = 1;
};

// ---- walks ----

struct PathSeg {
  long site = 0;
  double lo = 0, hi = 0;  // occupies [lo, hi]; the upper segment wins at shared ends
  long dots = 0;          // dots at the site in (lo, hi]
};

// Backward path: segments from the start time down to the floor.
struct WebPath {
  double t = 0;
  long site = 0;
  double floor = 0;
  std::vector<PathSeg> segs;
  std::vector<double> tau;  // interpolation width of each jump (segs[i] -> segs[i+1])

  long site_at(double u) const {
    if (u > t + 1e-12 || u < floor - 1e-12) throw RangeError("path: time outside the path");
    for (const auto& s : segs)
      if (u >= s.lo) return s.site;
    return segs.back().site;
  }
  long total_dots() const {
    long c = 0;
    for (const auto& s : segs) c += s.dots;
    return c;
  }
};

inline void check_point(const EventField& f, double t, long site) {
  const auto& w = f.window();
  if (t < w.t0 || t > w.t1 || !f.site_inside(site)) throw InputError("point outside the event window");
}

// Width of the linear interpolation after a jump at time s out of `site`:
// half the gap to the next arrow at the site or its neighbours, capped at
// delta^2. It depends on (site, s) only, so coalesced paths interpolate
// identically.
inline double jump_width(const EventField& f, long site, double s) {
  double cap = f.delta() * f.delta();
  double g = s + 2 * cap;
  for (long k = site - 1; k <= site + 1; ++k)
    if (auto n = f.next_arrow_time(k, s, g)) g = std::min(g, *n);
  return std::min(cap, (g - s) / 2);
}

inline WebPath backward_walk(const EventField& f, double t, long site, std::optional<double> floor_opt = std::nullopt,
                             bool interpolate = false) {
  check_point(f, t, site);
  double floor = floor_opt.value_or(f.window().t0);
  if (floor > t) throw InputError("backward_walk: floor above the start time");
  WebPath p{t, site, floor, {}, {}};
  double s = t;
  long k = site;
  // scan blocks downward once, counting dots on the way
  long b = f.block_of(s);
  std::vector<Event> ev = f.block(k, b);
  long i = static_cast<long>(ev.size()) - 1;
  long dots = 0;
  while (true) {
    std::optional<Event> e;
    while (true) {
      while (i >= 0 && ev[i].t >= s) --i;
      if (i >= 0) {
        const Event& c = ev[i];
        if (c.t <= floor) break;
        if (c.kind != EventKind::Dot) {
          e = c;
          break;
        }
        ++dots;
        --i;
        continue;
      }
      if (b <= f.block_of(floor)) break;
      ev = f.block(k, --b);
      i = static_cast<long>(ev.size()) - 1;
    }
    double lo = e ? e->t : floor;
    p.segs.push_back({k, lo, s, dots});
    if (!e) break;
    long next = e->kind == EventKind::Left ? k + 1 : k - 1;
    if (interpolate) p.tau.push_back(jump_width(f, k, e->t));
    if (!f.site_inside(next)) throw TruncationError("backward walk left the site window", static_cast<double>(next));
    k = next;
    s = e->t;
    dots = 0;
    ev = f.block(k, b);
    i = static_cast<long>(ev.size()) - 1;
  }
  return p;
}

// Largest time at which two backward paths share a site, if any.
inline std::optional<double> meeting_time(const WebPath& a, const WebPath& b) {
  double top = std::min(a.t, b.t), bottom = std::max(a.floor, b.floor);
  std::size_t i = 0, j = 0;
  while (i < a.segs.size() && a.segs[i].lo > top) ++i;
  while (j < b.segs.size() && b.segs[j].lo > top) ++j;
  double u = top;
  while (i < a.segs.size() && j < b.segs.size()) {
    if (a.segs[i].site == b.segs[j].site) return u;
    double lo = std::max(a.segs[i].lo, b.segs[j].lo);
    if (lo <= bottom) break;
    u = lo;
    if (a.segs[i].lo == lo) ++i;
    if (j < b.segs.size() && b.segs[j].lo == lo) ++j;
  }
  return std::nullopt;
}

inline double ancestral_distance(const EventField& f, double t, long x, double tp, long xp) {
  auto a = backward_walk(f, t, x), b = backward_walk(f, tp, xp);
  auto m = meeting_time(a, b);
  if (!m) throw TruncationError("no coalescence inside the window", f.window().t0);
  return (t - *m) + (tp - *m);
}

// Dual forward path at dual index j (position (j + 1/2) delta), segments
// ordered upward in time.
struct DualPath {
  double t = 0;
  long j = 0;
  std::vector<PathSeg> segs;

  long index_at(double u) const {
    for (auto it = segs.rbegin(); it != segs.rend(); ++it)
      if (u >= it->lo) return it->site;
    return segs.front().site;
  }
};

// The dual walk at j moves to j-1 on a left arrow at site j and to j+1 on a
// right arrow at site j+1.
inline DualPath forward_walk(const EventField& f, double t, long j, std::optional<double> ceil_opt = std::nullopt) {
  check_point(f, t, j);
  double ceil = ceil_opt.value_or(f.window().t1);
  DualPath p{t, j, {}};
  double s = t;
  long k = j;
  while (true) {
    auto l = f.next_of(k, EventKind::Left, s, ceil);
    auto r = f.next_of(k + 1, EventKind::Right, s, ceil);
    std::optional<double> nt;
    long next = k;
    if (l && (!r || l->t < r->t)) nt = l->t, next = k - 1;
    else if (r) nt = r->t, next = k + 1;
    double hi = nt.value_or(ceil);
    p.segs.push_back({k, s, hi, 0});
    if (!nt) break;
    if (!f.site_inside(next) || !f.site_inside(next + 1))
      throw TruncationError("dual walk left the site window", static_cast<double>(next));
    k = next;
    s = *nt;
  }
  return p;
}

// Counts strict crossings between a backward path and a dual path, testing
// the sign of (dual position - primal position) on every open interval
// between breakpoints of the common time range.
inline int count_crossings(const WebPath& b, const DualPath& d) {
  double lo = std::max(b.floor, d.t), hi = std::min(b.t, d.segs.back().hi);
  if (!(hi > lo)) return 0;
  std::vector<double> cuts{lo, hi};
  for (const auto& s : b.segs)
    if (s.lo > lo && s.lo < hi) cuts.push_back(s.lo);
  for (const auto& s : d.segs)
    if (s.lo > lo && s.lo < hi) cuts.push_back(s.lo);
  std::sort(cuts.begin(), cuts.end());
  int sign = 0, crossings = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    double u = 0.5 * (cuts[i] + cuts[i + 1]);
    double diff = (d.index_at(u) + 0.5) - b.site_at(u);
    int sg = diff > 0 ? 1 : -1;
    if (sign != 0 && sg != sign) ++crossings;
    sign = sg;
  }
  return crossings;
}

// ---- web tree ----

struct WebPoint {
  double t = 0;
  long site = 0;
};

// Piecewise-linear interpolation of a backward path, knots increasing in time.
inline std::vector<std::pair<double, double>> interpolated_path(const WebPath& p, double delta) {
  std::vector<std::pair<double, double>> k;
  const auto& S = p.segs;
  k.push_back({p.floor, S.back().site * delta});
  for (std::size_t i = S.size() - 1; i >= 1; --i) {
    // jump at S[i].hi == S[i-1].lo from S[i-1].site (above) to S[i].site (below)
    double s = S[i].hi, tau = p.tau.empty() ? 0.0 : p.tau[i - 1];
    k.push_back({s, S[i].site * delta});
    k.push_back({s + tau, S[i - 1].site * delta});
  }
  k.push_back({p.t, S.front().site * delta});
  // drop zero-width duplicates in time, keeping the later value
  std::vector<std::pair<double, double>> out;
  for (const auto& q : k) {
    if (!out.empty() && q.first <= out.back().first) {
      if (q.first == out.back().first) out.back().second = q.second;
      continue;
    }
    out.push_back(q);
  }
  return out;
}

inline double pl_eval(const std::vector<std::pair<double, double>>& k, double u) {
  if (u <= k.front().first) return k.front().second;
  if (u >= k.back().first) return k.back().second;
  auto it = std::lower_bound(k.begin(), k.end(), u, [](const auto& p, double v) { return p.first < v; });
  auto [t1, x1] = *it;
  auto [t0, x0] = *(it - 1);
  return t1 > t0 ? x0 + (x1 - x0) * (u - t0) / (t1 - t0) : x1;
}

struct WebTree {
  SpatialTree st;
  std::vector<WebPoint> points;
  std::vector<int> point_node;               // tree node of each query point
  std::vector<std::vector<PathSeg>> segs;    // primal site occupation per edge (time intervals)
  double floor = 0;
  double t_root = 0;
  std::uint64_t seed = 0;
  double delta = 0;
  double max_interp_gap = 0;                 // sup |interpolated x - lattice x| seen on knots

  const FiniteRTree& tree() const { return st.tree(); }

  long site_at(const Locus& z) const {
    Locus c = tree().canon(z);
    double u = st.nominal_time(c);
    for (const auto& s : segs.at(c.edge))
      if (u >= s.lo - 1e-12 && u <= s.hi + 1e-12) return s.site;
    throw RangeError("web tree: time outside the edge");
  }
};

// The tree spanned by the backward walks from the query points; root at the
// last merge, root ray down to the floor.
inline WebTree web_tree_view(const EventField& f, const std::vector<WebPoint>& pts_in,
                             std::optional<double> floor_opt = std::nullopt) {
  if (pts_in.empty()) throw InputError("web_tree_view: no query points");
  double floor = floor_opt.value_or(f.window().t0);
  std::vector<WebPoint> pts;
  for (const auto& p : pts_in) {
    bool dup = false;
    for (const auto& q : pts) dup |= q.t == p.t && q.site == p.site;
    if (!dup) pts.push_back(p);
  }
  const int k = static_cast<int>(pts.size());
  std::vector<WebPath> paths;
  for (const auto& p : pts) paths.push_back(backward_walk(f, p.t, p.site, floor, true));

  // cluster by decreasing meeting time
  struct Node {
    double t;
    int rep;  // path index
    int parent = -1;
  };
  std::vector<Node> nodes;
  std::vector<int> top(k), point_node(k);
  for (int i = 0; i < k; ++i) {
    nodes.push_back({pts[i].t, i});
    top[i] = point_node[i] = i;
  }
  std::vector<int> cl(k);
  for (int i = 0; i < k; ++i) cl[i] = i;
  std::vector<std::vector<double>> m(k, std::vector<double>(k, -std::numeric_limits<double>::infinity()));
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      auto mt = meeting_time(paths[i], paths[j]);
      if (!mt) throw TruncationError("web_tree_view: paths do not coalesce above the floor", floor);
      m[i][j] = m[j][i] = *mt;
    }
  const double eps = 1e-12;
  for (int round = 0; round < k - 1; ++round) {
    double best = -std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        if (cl[i] != cl[j] && m[i][j] > best) best = m[i][j], bi = cl[i], bj = cl[j];
    // attach clusters bi, bj at time `best`
    int ti = top[bi], tj = top[bj];
    int parent;
    if (std::abs(nodes[ti].t - best) <= eps) {
      parent = ti;
    } else if (std::abs(nodes[tj].t - best) <= eps) {
      parent = tj;
      std::swap(ti, tj);
    } else {
      parent = static_cast<int>(nodes.size());
      nodes.push_back({best, nodes[ti].rep});
      nodes[ti].parent = parent;
    }
    if (tj != parent) nodes[tj].parent = parent;
    for (auto& c : cl)
      if (c == bj) c = bi;
    top[bi] = parent;
  }
  int root = top[cl[0]];
  double t_root = nodes[root].t;
  if (t_root < floor) throw TruncationError("web_tree_view: root below the floor", floor);

  const int n = static_cast<int>(nodes.size());
  std::vector<int> par(n);
  std::vector<double> len(n, 0.0);
  for (int v = 0; v < n; ++v) {
    par[v] = nodes[v].parent;
    if (v != root) len[v] = nodes[v].t - nodes[nodes[v].parent].t;
  }
  FiniteRTree tree(par, len, t_root - floor);

  WebTree wt;
  wt.points = pts;
  wt.point_node = point_node;
  wt.floor = floor;
  wt.t_root = t_root;
  wt.seed = f.seed();
  wt.delta = f.delta();
  wt.segs.resize(n);
  std::vector<std::vector<std::pair<double, double>>> xs(n);
  for (int v = 0; v < n; ++v) {
    const WebPath& P = paths[nodes[v].rep];
    double hi = nodes[v].t, lo = v == root ? floor : nodes[nodes[v].parent].t;
    auto pl = interpolated_path(P, f.delta());
    auto s_of = [&](double u) { return hi - u; };
    xs[v].push_back({0.0, pl_eval(pl, hi)});
    for (const auto& [u, x] : pl)
      if (u > lo && u < hi) xs[v].push_back({s_of(u), x});
    if (hi > lo) xs[v].push_back({hi - lo, pl_eval(pl, lo)});
    for (const auto& s : P.segs) {
      double a = std::max(s.lo, lo), b = std::min(s.hi, hi);
      if (b > a || (b == a && lo == hi)) wt.segs[v].push_back({s.site, a, b, f.dots(s.site, a, b)});
    }
    for (const auto& [u, x] : pl)
      if (u >= lo && u <= hi) wt.max_interp_gap = std::max(wt.max_interp_gap, std::abs(x - P.site_at(u) * f.delta()));
  }
  wt.st = SpatialTree::from_x(std::move(tree), 1, t_root, xs);
  return wt;
}

// N(z) = delta (dots on [root, z] - 2 gamma d(root, z)).
inline double rcpp_on_tree(const WebTree& w, const EventField& f, const Locus& z0) {
  if (w.seed != f.seed() || w.delta != f.delta()) throw InputError("rcpp_on_tree: tree built from another field");
  const auto& T = w.tree();
  Locus z = T.canon(z0);
  double tz = w.st.nominal_time(z);
  long dots = 0;
  if (T.depth(z) >= 0) {
    // z's edge from tz down, then whole ancestor edges, stopping at the root node
    for (int e = z.edge; e != T.root(); e = T.parent(e)) {
      double top = e == z.edge ? tz : w.st.nominal_time(T.node(e));
      for (const auto& s : w.segs[e]) {
        double a = s.lo, b = std::min(s.hi, top);
        if (b > a) dots += f.dots(s.site, a, b);
      }
    }
  } else {
    for (const auto& s : w.segs[T.root()]) {
      double a = std::max(s.lo, tz), b = s.hi;
      if (b > a) dots += f.dots(s.site, a, b);
    }
  }
  return f.delta() * (static_cast<double>(dots) - 2 * f.gamma() * T.distance(z, T.node(T.root())));
}

// Rescaled 0-BD height at locus z: initial value at the time-0 ancestor plus
// delta times the dots between that ancestor and z, compensated.
inline double bd_height_at(const WebTree& w, const EventField& f, const std::function<double(long)>& h0, const Locus& z0) {
  if (w.seed != f.seed() || w.delta != f.delta()) throw InputError("bd_height_at: tree built from another field");
  const auto& T = w.tree();
  Locus z = T.canon(z0);
  double tz = w.st.nominal_time(z);
  if (tz < 0) throw InputError("bd_height_at: negative time");
  if (w.floor > 0) throw TruncationError("bd_height_at: the tree does not reach time 0", w.floor);
  Locus a = w.st.radial(z, 0.0);
  long dots = 0;
  // walk from z to a along the ancestral line
  Locus c = z;
  while (true) {
    double top = w.st.nominal_time(c);
    bool last = c.edge == a.edge;
    double bottom = last ? 0.0 : w.st.nominal_time(T.node(c.edge == T.root() ? c.edge : T.parent(c.edge)));
    for (const auto& s : w.segs[c.edge]) {
      double lo = std::max(s.lo, bottom), hi = std::min(s.hi, top);
      if (hi > lo) dots += f.dots(s.site, lo, hi);
    }
    if (last) break;
    c = T.node(T.parent(c.edge));
  }
  return h0(w.site_at(a)) + f.delta() * static_cast<double>(dots) - 2 * f.gamma() * f.delta() * tz;
}

inline double bd_height_at_point(const EventField& f, const std::function<double(long)>& h0, double t, long site) {
  auto p = backward_walk(f, t, site, 0.0);
  return h0(p.segs.back().site) + f.delta() * static_cast<double>(p.total_dots()) - 2 * f.gamma() * f.delta() * t;
}

// ---- beta-BD dynamics ----

struct HeightField {
  double t = 0;
  long site_lo = 0;
  std::vector<double> h;

  double at(long site) const { return h.at(static_cast<std::size_t>(site - site_lo)); }
};

constexpr double kBetaInf = std::numeric_limits<double>::infinity();

// Probabilities of picking (h(x-1), h(x)+1, h(x+1)).
inline std::array<double, 3> gibbs_probabilities(double beta, const std::array<double, 3>& y) {
  std::array<double, 3> p{};
  if (std::isinf(beta)) {
    double m = std::max({y[0], y[1], y[2]});
    int pick = y[1] == m ? 1 : (y[0] == m ? 0 : 2);
    p[pick] = 1;
    return p;
  }
  double m = std::max({y[0], y[1], y[2]}), z = 0;
  for (int i = 0; i < 3; ++i) z += p[i] = std::exp(beta * (y[i] - m));
  for (auto& v : p) v /= z;
  return p;
}

inline double gibbs_choice(double beta, const std::array<double, 3>& y, double u) {
  if (std::isinf(beta)) return std::max({y[0], y[1], y[2]});
  auto p = gibbs_probabilities(beta, y);
  return u < p[0] ? y[0] : (u < p[0] + p[1] ? y[1] : y[2]);
}

struct SiteEvent {
  double t;
  long site;
  Event e;
};

inline std::vector<SiteEvent> window_events(const EventField& f, double a, double b) {
  std::vector<SiteEvent> all;
  for (long k = f.first_site(); k < f.first_site() + f.site_count(); ++k)
    for (const auto& e : f.events(k, a, b)) all.push_back({e.t, k, e});
  std::sort(all.begin(), all.end(), [](const SiteEvent& x, const SiteEvent& y) {
    return x.t < y.t || (x.t == y.t && x.site < y.site);
  });
  return all;
}

// beta = 0 runs the three streams as the three cases; beta > 0 treats every
// event as a clock ring with a Gibbs choice driven by the event mark. A
// missing neighbour at the window boundary is replaced by the site's own
// value. Snapshots are returned at each requested time (plus the end).
inline std::vector<HeightField> simulate_beta_bd(const EventField& f, double beta, const HeightField& h0,
                                                 std::vector<double> snapshots = {}) {
  if (!(beta >= 0)) throw InputError("simulate_beta_bd: beta must be >= 0");
  if (h0.site_lo != f.first_site() || static_cast<long>(h0.h.size()) != f.site_count() || h0.t != f.window().t0)
    throw InputError("simulate_beta_bd: initial condition does not match the window");
  std::sort(snapshots.begin(), snapshots.end());
  snapshots.push_back(f.window().t1);
  std::vector<HeightField> out;
  std::vector<double> h = h0.h;
  const long n = f.site_count(), lo = f.first_site();
  auto val = [&](long site, long self) {
    long k = f.periodic() ? f.wrap(site) : site;
    if (!f.periodic() && (k < lo || k >= lo + n)) return h[static_cast<std::size_t>(self - lo)];
    return h[static_cast<std::size_t>(k - lo)];
  };
  std::size_t snap = 0;
  for (const auto& se : window_events(f, f.window().t0, f.window().t1)) {
    while (snap < snapshots.size() && snapshots[snap] < se.t) out.push_back({snapshots[snap++], lo, h});
    auto& hx = h[static_cast<std::size_t>(se.site - lo)];
    std::array<double, 3> y{val(se.site - 1, se.site), hx + 1, val(se.site + 1, se.site)};
    if (beta == 0) {
      hx = se.e.kind == EventKind::Left ? y[2] : (se.e.kind == EventKind::Right ? y[0] : y[1]);
    } else {
      hx = gibbs_choice(beta, y, se.e.mark);
    }
  }
  while (snap < snapshots.size()) out.push_back({snapshots[snap++], lo, h});
  return out;
}

// Independent max-rule reference: h(x) <- max(h(x-1), h(x)+1, h(x+1)) at
// every event, used to cross-check the beta = infinity branch.
inline HeightField max_rule_reference(const EventField& f, const HeightField& h0) {
  std::vector<double> h = h0.h;
  const long n = static_cast<long>(h.size());
  for (const auto& se : window_events(f, f.window().t0, f.window().t1)) {
    long i = se.site - h0.site_lo;
    double l = i > 0 ? h[i - 1] : (f.periodic() ? h[n - 1] : h[i]);
    double r = i + 1 < n ? h[i + 1] : (f.periodic() ? h[0] : h[i]);
    h[i] = std::max(std::max(l, r), h[i] + 1);
  }
  return {f.window().t1, h0.site_lo, h};
}

// delta (h - 2 gamma (t - t0)); only meaningful for the 0-BD.
inline HeightField rescale_height(const HeightField& raw, const EventField& f, double beta) {
  if (beta != 0) throw InputError("rescale_height: the recentring is specific to beta = 0");
  HeightField out{raw.t, raw.site_lo, raw.h};
  for (auto& v : out.h) v = f.delta() * (v - 2 * f.gamma() * (raw.t - f.window().t0));
  return out;
}

// Runs `fn(window)`; on truncation doubles the window (sites and depth)
// up to `doublings` times. The event field is window-independent, so
// enlarging keeps the realization.
template <class F>
auto with_enlargement(WebWindow w, int doublings, F&& fn) -> decltype(fn(w)) {
  for (int i = 0;; ++i) {
    try {
      return fn(w);
    } catch (const TruncationError&) {
      if (i >= doublings) throw;
      long c = (w.site_lo + w.site_hi) / 2, r = std::max(1L, w.site_hi - w.site_lo);
      w.site_lo = c - r;
      w.site_hi = c + r;
      w.t0 -= (w.t1 - w.t0);
    }
  }
}

}  // namespace bcastle
