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

// Finite rooted R-trees.
//
// Nodes carry a parent link and the length of the edge to that parent. The
// root has no edge; instead it carries an optional "ray" of finite length
// that stands in for the open end. A point of the tree is a Locus
// (edge, offset): edge is the child node id of the edge and offset is the
// distance travelled from that child toward the root. Loci on the ray use
// edge == root and offset in [0, ray].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bcastle/errors.hpp"
#include "bcastle/rng.hpp"

namespace bcastle {

inline constexpr double kTol = 1e-12;

inline bool near(double a, double b, double tol = 1e-9) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

struct Locus {
  int edge = 0;
  double off = 0.0;
};

class FiniteRTree;

struct Segment {
  Locus a, b, turn;  // turn: deepest common ancestor of a and b
  double length = 0;
};

class FiniteRTree {
 public:
  FiniteRTree() : FiniteRTree(std::vector<int>{-1}, std::vector<double>{0.0}) {}

  // parent[root] == -1; len[v] > 0 for v != root.
  FiniteRTree(std::vector<int> parent, std::vector<double> len, double ray = 0.0)
      : parent_(std::move(parent)), len_(std::move(len)), ray_(ray) {
    build();
  }

  // Path of length L hanging below the root.
  static FiniteRTree path(double L, double ray = 0.0) {
    if (L <= 0) return FiniteRTree({-1}, {0.0}, ray);
    return FiniteRTree({-1, 0}, {0.0, L}, ray);
  }
  // Root with one child per entry of `branches`.
  static FiniteRTree star(const std::vector<double>& branches, double ray = 0.0) {
    std::vector<int> p{-1};
    std::vector<double> l{0.0};
    for (double b : branches) {
      p.push_back(0);
      l.push_back(b);
    }
    return FiniteRTree(p, l, ray);
  }

  int size() const { return static_cast<int>(parent_.size()); }
  int root() const { return root_; }
  int parent(int v) const { return parent_.at(v); }
  double length(int v) const { return v == root_ ? ray_ : len_.at(v); }
  double ray() const { return ray_; }
  const std::vector<int>& children(int v) const { return kids_.at(v); }
  double node_depth(int v) const { return depth_.at(v); }
  double height(int v) const { return height_.at(v); }
  // Preorder from the root; parents before children.
  const std::vector<int>& order() const { return order_; }

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (int v : order_)
      if (kids_[v].empty() && v != root_) out.push_back(v);
    return out;
  }

  double total_length(bool with_ray = true) const {
    double s = with_ray ? ray_ : 0.0;
    for (int v = 0; v < size(); ++v)
      if (v != root_) s += len_[v];
    return s;
  }

  Locus node(int v) const {
    check_node(v);
    return {v, 0.0};
  }
  Locus ray_tip() const { return {root_, ray_}; }

  void check(const Locus& z) const {
    if (z.edge < 0 || z.edge >= size()) throw InputError("locus: edge id out of range");
    double L = length(z.edge);
    if (!(z.off >= -kTol) || z.off > L + kTol * std::max(1.0, L))
      throw InputError("locus: offset outside edge");
  }

  // Canonical form: endpoints are addressed by their node with offset 0.
  Locus canon(Locus z) const {
    check(z);
    z.off = std::max(0.0, z.off);
    while (z.edge != root_ && z.off >= len_[z.edge] - kTol * std::max(1.0, len_[z.edge])) {
      z.off = std::max(0.0, z.off - len_[z.edge]);
      z.edge = parent_[z.edge];
    }
    if (z.edge == root_) z.off = std::min(z.off, ray_);
    return z;
  }

  bool same(const Locus& a, const Locus& b) const {
    Locus x = canon(a), y = canon(b);
    return x.edge == y.edge && std::abs(x.off - y.off) <= 1e-12 * std::max(1.0, std::abs(x.off));
  }

  // Signed distance from the root; negative on the ray.
  double depth(const Locus& z) const {
    check(z);
    return depth_[z.edge] - z.off;
  }

  // True when u is an ancestor of (or equal to) node v.
  bool node_ancestor(int u, int v) const { return tin_[u] <= tin_[v] && tout_[v] <= tout_[u]; }

  int lca(int u, int v) const {
    if (node_ancestor(u, v)) return u;
    if (node_ancestor(v, u)) return v;
    for (int k = static_cast<int>(up_.size()) - 1; k >= 0; --k) {
      int w = up_[k][u];
      if (!node_ancestor(w, v)) u = w;
    }
    return up_[0][u];
  }

  // Deepest common ancestor locus.
  Locus dca(const Locus& a0, const Locus& b0) const {
    Locus a = canon(a0), b = canon(b0);
    if (a.edge == b.edge) return a.off >= b.off ? a : b;
    if (node_ancestor(a.edge, b.edge)) return a;
    if (node_ancestor(b.edge, a.edge)) return b;
    return {lca(a.edge, b.edge), 0.0};
  }

  // a lies on the ray from b toward the open end.
  bool is_ancestor(const Locus& a, const Locus& b) const {
    Locus c = dca(a, b);
    return std::abs(depth(c) - depth(a)) <= 1e-12 * std::max(1.0, std::abs(depth(a)));
  }

  double distance(const Locus& a, const Locus& b) const {
    Locus c = dca(a, b);
    return std::max(0.0, depth(a) + depth(b) - 2.0 * depth(c));
  }

  Segment segment(const Locus& a, const Locus& b) const {
    Locus c = dca(a, b);
    return {canon(a), canon(b), c, distance(a, b)};
  }

  bool on_segment(const Locus& z, const Locus& a, const Locus& b, double tol = 1e-9) const {
    return std::abs(distance(a, z) + distance(z, b) - distance(a, b)) <= tol;
  }

  // Moves `s` toward the root, continuing onto the ray.
  Locus up(Locus z, double s) const {
    z = canon(z);
    if (s < -kTol) throw RangeError("up: negative displacement");
    s = std::max(0.0, s);
    while (z.edge != root_) {
      double room = len_[z.edge] - z.off;
      if (s < room - kTol * std::max(1.0, room)) {
        z.off += s;
        return z;
      }
      s -= room;
      z = {parent_[z.edge], 0.0};
    }
    z.off += s;
    if (z.off > ray_ + 1e-9 * std::max(1.0, ray_)) throw RangeError("up: beyond the root ray");
    z.off = std::min(z.off, ray_);
    return z;
  }

  // Point at depth `target` on the ray from z toward the open end.
  Locus at_depth(const Locus& z, double target) const { return up(z, depth(z) - target); }

  // Point at distance u from a, on the segment from a to b.
  Locus along(const Locus& a, const Locus& b, double u) const {
    Locus c = dca(a, b);
    double da = depth(a) - depth(c), db = depth(b) - depth(c);
    if (u <= da) return up(a, u);
    double back = da + db - u;  // distance from b upward
    return up(b, std::max(0.0, back));
  }

  int degree(const Locus& z0) const {
    Locus z = canon(z0);
    if (z.edge == root_) {
      if (z.off > 0) return z.off >= ray_ ? 1 : 2;
      return static_cast<int>(kids_[root_].size()) + (ray_ > 0 ? 1 : 0);
    }
    if (z.off > 0) return 2;
    return static_cast<int>(kids_[z.edge].size()) + 1;
  }

  // Endpoints other than the root: leaves plus the ray tip.
  std::vector<Locus> endpoints() const {
    std::vector<Locus> out;
    for (int v : leaves()) out.push_back({v, 0.0});
    if (ray_ > 0) out.push_back(ray_tip());
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json nodes = nlohmann::json::array();
    for (int v = 0; v < size(); ++v)
      nodes.push_back({{"id", v}, {"parent", parent_[v]}, {"len", v == root_ ? 0.0 : len_[v]}});
    return {{"nodes", nodes}, {"root", root_}, {"ray", ray_}};
  }

  static FiniteRTree from_json(const nlohmann::json& j) {
    const auto& nodes = j.at("nodes");
    std::vector<int> p(nodes.size(), -1);
    std::vector<double> l(nodes.size(), 0.0);
    for (const auto& n : nodes) {
      int id = n.at("id").get<int>();
      if (id < 0 || id >= static_cast<int>(nodes.size())) throw InputError("tree json: bad id");
      p[id] = n.at("parent").get<int>();
      l[id] = n.value("len", 0.0);
    }
    return FiniteRTree(p, l, j.value("ray", 0.0));
  }

 private:
  void check_node(int v) const {
    if (v < 0 || v >= size()) throw InputError("node id out of range");
  }

  void build() {
    int n = size();
    if (n == 0 || static_cast<int>(len_.size()) != n) throw InputError("tree: size mismatch");
    if (ray_ < 0) throw InputError("tree: negative ray");
    root_ = -1;
    kids_.assign(n, {});
    for (int v = 0; v < n; ++v) {
      if (parent_[v] < 0) {
        if (root_ >= 0) throw InputError("tree: more than one root");
        root_ = v;
        len_[v] = 0.0;
      } else {
        if (parent_[v] >= n) throw InputError("tree: parent out of range");
        if (!(len_[v] > 0)) throw InputError("tree: edge lengths must be positive");
        kids_[parent_[v]].push_back(v);
      }
    }
    if (root_ < 0) throw InputError("tree: no root");
    depth_.assign(n, 0.0);
    tin_.assign(n, 0);
    tout_.assign(n, 0);
    order_.clear();
    std::vector<std::pair<int, std::size_t>> st{{root_, 0}};
    std::vector<char> seen(n, 0);
    seen[root_] = 1;
    int clock = 0;
    tin_[root_] = clock++;
    order_.push_back(root_);
    while (!st.empty()) {
      auto& [v, i] = st.back();
      if (i < kids_[v].size()) {
        int c = kids_[v][i++];
        if (seen[c]) throw InputError("tree: cycle");
        seen[c] = 1;
        depth_[c] = depth_[v] + len_[c];
        tin_[c] = clock++;
        order_.push_back(c);
        st.push_back({c, 0});
      } else {
        tout_[v] = clock++;
        st.pop_back();
      }
    }
    if (static_cast<int>(order_.size()) != n) throw InputError("tree: not connected (cycle)");
    int lg = 1;
    while ((1 << lg) < n) ++lg;
    up_.assign(lg, std::vector<int>(n));
    for (int v = 0; v < n; ++v) up_[0][v] = parent_[v] < 0 ? v : parent_[v];
    for (int k = 1; k < lg; ++k)
      for (int v = 0; v < n; ++v) up_[k][v] = up_[k - 1][up_[k - 1][v]];
    height_.assign(n, 0.0);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      int v = *it;
      for (int c : kids_[v]) height_[v] = std::max(height_[v], height_[c] + len_[c]);
    }
  }

  std::vector<int> parent_;
  std::vector<double> len_;
  double ray_ = 0.0;
  int root_ = 0;
  std::vector<std::vector<int>> kids_;
  std::vector<double> depth_, height_;
  std::vector<int> tin_, tout_, order_;
  std::vector<std::vector<int>> up_;
};

// A root-containing subtree re-materialized as its own tree. origin[v] is
// the locus of the original tree that node v stands for; the ray of the
// subtree maps onto the original ray.
struct SubTree {
  FiniteRTree tree;
  std::vector<Locus> origin;

  Locus to_original(const FiniteRTree& orig, const Locus& z) const {
    tree.check(z);
    if (z.edge == tree.root()) return orig.canon({orig.root(), z.off});
    return orig.up(origin[z.edge], z.off);
  }
};

// Keeps, for every edge v, the offsets [cut[v], len(v)] (cut < 0 drops the
// edge), and the ray offsets [0, ray_keep].
inline SubTree restrict_by_cuts(const FiniteRTree& t, const std::vector<double>& cut, double ray_keep) {
  std::vector<int> np{-1};
  std::vector<double> nl{0.0};
  std::vector<Locus> origin{t.node(t.root())};
  std::vector<int> id(t.size(), -1);
  id[t.root()] = 0;
  for (int v : t.order()) {
    if (v == t.root()) continue;
    int p = t.parent(v);
    if (id[p] < 0 || cut[v] < 0) continue;
    double L = t.length(v);
    double c = std::clamp(cut[v], 0.0, L);
    double kept = L - c;
    if (kept <= kTol * std::max(1.0, L)) continue;
    id[v] = static_cast<int>(np.size());
    np.push_back(id[p]);
    nl.push_back(kept);
    origin.push_back(c <= kTol * std::max(1.0, L) ? Locus{v, 0.0} : Locus{v, c});
    if (c > kTol * std::max(1.0, L)) id[v] = -2 - id[v];  // cut leaf: children dropped
  }
  for (auto& x : id)
    if (x < -1) x = -1;
  return {FiniteRTree(np, nl, std::clamp(ray_keep, 0.0, t.ray())), origin};
}

inline SubTree compose(const FiniteRTree& orig, const SubTree& outer, const SubTree& inner) {
  SubTree out{inner.tree, {}};
  out.origin.reserve(inner.origin.size());
  for (const auto& z : inner.origin) out.origin.push_back(outer.to_original(orig, z));
  return out;
}

inline SubTree identity_subtree(const FiniteRTree& t) {
  std::vector<double> cut(t.size(), 0.0);
  return restrict_by_cuts(t, cut, t.ray());
}

// Closed ball of radius r around the root (ray included up to r).
inline SubTree ball(const FiniteRTree& t, double r) {
  if (r < 0) throw InputError("ball: negative radius");
  std::vector<double> cut(t.size(), -1.0);
  for (int v = 0; v < t.size(); ++v) {
    if (v == t.root()) continue;
    double dp = t.node_depth(t.parent(v));
    if (dp >= r) continue;
    cut[v] = std::max(0.0, t.node_depth(v) - r);
  }
  return restrict_by_cuts(t, cut, std::min(r, t.ray()));
}

// R_eta: points on some segment [root, w] at distance >= eta from w, plus the root.
inline SubTree trim(const FiniteRTree& t, double eta) {
  if (!(eta > 0)) throw InputError("trim: eta must be positive");
  std::vector<double> cut(t.size(), -1.0);
  for (int v = 0; v < t.size(); ++v) {
    if (v == t.root()) continue;
    double h = t.height(v), L = t.length(v);
    if (h >= eta) {
      cut[v] = 0.0;
    } else if (h + L > eta) {
      cut[v] = eta - h;
    }
  }
  return restrict_by_cuts(t, cut, std::max(0.0, t.ray() - eta));
}

// Distance from z to the subtree (z a locus of the original tree).
inline double distance_to_subtree(const FiniteRTree& orig, const SubTree& s, const Locus& z) {
  double best = std::min(0.0, orig.depth(z));  // the root always belongs to s
  double dz = orig.depth(z);
  if (dz < 0) {  // on the ray
    double keep = s.tree.ray();
    return std::max(0.0, -dz - keep);
  }
  best = 0.0;
  for (const auto& e : s.tree.endpoints()) {
    Locus w = s.to_original(orig, e);
    if (orig.depth(w) < 0) continue;
    best = std::max(best, orig.depth(orig.dca(z, w)));
  }
  return std::max(0.0, dz - best);
}

// Hausdorff distance between a tree and one of its root-containing subtrees.
inline double hausdorff_to_subtree(const FiniteRTree& orig, const SubTree& s) {
  double h = 0.0;
  for (const auto& e : orig.endpoints()) h = std::max(h, distance_to_subtree(orig, s, e));
  if (orig.leaves().empty() && orig.ray() == 0) return 0.0;
  return h;
}

// True when every point of a lies in b (both subtrees of orig).
inline bool subtree_included(const FiniteRTree& orig, const SubTree& a, const SubTree& b, double tol = 1e-9) {
  for (const auto& e : a.tree.endpoints())
    if (distance_to_subtree(orig, b, a.to_original(orig, e)) > tol) return false;
  return true;
}

// Endpoints other than the root.
inline int endpoint_count(const FiniteRTree& t) { return static_cast<int>(t.endpoints().size()); }

struct NetSize {
  long lower = 0, upper = 0;
  bool exact() const { return lower == upper; }
};

// Minimal number of closed eps-balls covering the tree (ray included).
//
// Bottom-up greedy that places each center as far from the leaves as the
// deepest uncovered point allows. For covering a tree by balls of a common
// radius with centers anywhere on the tree this greedy is optimal, so the
// result is certified on every tree, not only on paths.
inline NetSize epsilon_net_size(const FiniteRTree& t, double eps) {
  if (!(eps > 0)) throw InputError("epsilon_net_size: eps must be positive");
  struct State {
    bool need;  // true: deepest uncovered point at distance val below
    double val; // need ? distance : coverage slack above
  };
  long count = 0;
  auto climb = [&](State s, double L) {
    while (true) {
      if (!s.need) {
        if (s.val >= L) return State{false, s.val - L};
        // coverage ends inside the edge; the first uncovered point sits right above it
        L -= s.val;
        s = {true, 0.0};
        continue;
      }
      if (s.val + L <= eps) return State{true, s.val + L};
      double go = eps - s.val;  // place a center here
      ++count;
      L -= go;
      s = {false, eps};
    }
  };
  std::vector<State> st(t.size(), State{true, 0.0});
  const auto& ord = t.order();
  for (auto it = ord.rbegin(); it != ord.rend(); ++it) {
    int v = *it;
    const auto& ks = t.children(v);
    if (ks.empty()) {
      st[v] = {true, 0.0};
      continue;
    }
    double need = -1, cover = -1;
    for (int c : ks) {
      State s = climb(st[c], t.length(c));
      if (s.need) need = std::max(need, s.val);
      else cover = std::max(cover, s.val);
    }
    if (need < 0) st[v] = {false, cover};
    else if (cover >= need) st[v] = {false, cover};
    else st[v] = {true, need};
  }
  State top = st[t.root()];
  if (t.ray() > 0) top = climb(top, t.ray());
  if (top.need) ++count;
  return {count, count};
}

// Radial map of the bare tree: the locus on the ray from z toward the open
// end whose depth is s (the tree's time coordinate when depth plays time).
inline Locus radial(const FiniteRTree& t, const Locus& z, double s) {
  double dz = t.depth(z);
  if (s > dz + 1e-12 * std::max(1.0, std::abs(dz))) throw RangeError("radial: target below z");
  return t.up(z, std::max(0.0, dz - s));
}

// Random rooted tree with n nodes, edge lengths uniform in [lo, hi].
inline FiniteRTree random_tree(Stream& rng, int n, double lo = 0.1, double hi = 1.0, double ray = 0.0) {
  if (n < 1) throw InputError("random_tree: n >= 1");
  std::vector<int> p(n, -1);
  std::vector<double> l(n, 0.0);
  for (int v = 1; v < n; ++v) {
    p[v] = static_cast<int>(rng() % static_cast<std::uint64_t>(v));
    l[v] = lo + (hi - lo) * rng.uniform();
  }
  return FiniteRTree(p, l, ray);
}

// Uniform point with respect to the length measure (ray excluded unless the
// tree has no edges).
inline Locus random_locus(const FiniteRTree& t, Stream& rng) {
  double total = t.total_length(false);
  if (total <= 0) return t.ray() > 0 ? Locus{t.root(), rng.uniform() * t.ray()} : t.node(t.root());
  double u = rng.uniform() * total;
  for (int v = 0; v < t.size(); ++v) {
    if (v == t.root()) continue;
    if (u <= t.length(v)) return t.canon({v, u});
    u -= t.length(v);
  }
  return t.node(t.root());
}

}  // namespace bcastle
