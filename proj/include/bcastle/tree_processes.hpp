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

// Processes indexed by a finite rooted tree: Brownian motion, Poisson
// measures with length intensity, the rescaled compensated smoothened (RCS)
// Poisson process, its line version, and an Orlicz tail estimator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bcastle/errors.hpp"
#include "bcastle/rng.hpp"
#include "bcastle/rtree.hpp"
#include "bcastle/stats.hpp"

namespace bcastle {

// Real values attached to a tree. knots[v] holds (s, value) with s the
// distance from the parent end of edge v, increasing. For the root, knots
// run up the ray with s the distance above the root.
struct BranchingMap {
  const FiniteRTree* tree = nullptr;
  double root_value = 0;
  std::vector<std::vector<std::pair<double, double>>> knots;

  double value(const Locus& z0) const {
    Locus z = tree->canon(z0);
    const auto& k = knots.at(z.edge);
    double s = z.edge == tree->root() ? z.off : tree->length(z.edge) - z.off;
    if (k.empty()) return root_value;
    if (s <= k.front().first) return k.front().second;
    if (s >= k.back().first) return k.back().second;
    auto it = std::lower_bound(k.begin(), k.end(), s, [](const auto& p, double v) { return p.first < v; });
    auto [s1, v1] = *it;
    auto [s0, v0] = *(it - 1);
    return s1 > s0 ? v0 + (v1 - v0) * (s - s0) / (s1 - s0) : v1;
  }

  // Rows (edge, offset-from-child, value), edges in preorder.
  std::vector<std::array<double, 3>> rows() const {
    std::vector<std::array<double, 3>> out;
    for (int v : tree->order()) {
      bool ray = v == tree->root();
      for (auto [s, x] : knots[v]) out.push_back({double(v), ray ? s : tree->length(v) - s, x});
    }
    return out;
  }
};

inline std::vector<double> knot_grid(double len, double spacing) {
  int n = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
  std::vector<double> s(n + 1);
  for (int i = 0; i <= n; ++i) s[i] = len * i / n;
  return s;
}

// Centred Gaussian process with E[(B(z)-B(w))^2] = d(z,w) and B(root) = 0.
inline BranchingMap sample_brownian_on_tree(const FiniteRTree& t, double spacing, Stream& rng, bool with_ray = false) {
  if (!(spacing > 0)) throw InputError("knot spacing must be positive");
  BranchingMap m{&t, 0.0, std::vector<std::vector<std::pair<double, double>>>(t.size())};
  std::vector<double> at_node(t.size(), 0.0);
  for (int v : t.order()) {
    if (v == t.root()) continue;
    double x = at_node[t.parent(v)];
    double prev = 0;
    for (double s : knot_grid(t.length(v), spacing)) {
      x += std::sqrt(s - prev) * rng.normal();
      prev = s;
      m.knots[v].push_back({s, x});
    }
    at_node[v] = x;
  }
  if (with_ray && t.ray() > 0) {
    double x = 0, prev = 0;
    for (double s : knot_grid(t.ray(), spacing)) {
      x += std::sqrt(s - prev) * rng.normal();
      prev = s;
      m.knots[t.root()].push_back({s, x});
    }
  }
  return m;
}

// E[(B1-B2)(B3-B4)] for Brownian motion indexed by the tree.
inline double increment_covariance(const FiniteRTree& t, const Locus& z1, const Locus& z2, const Locus& z3,
                                   const Locus& z4) {
  return 0.5 * (t.distance(z1, z4) + t.distance(z2, z3) - t.distance(z1, z3) - t.distance(z2, z4));
}

// Length of the intersection of the segments [z1,z2] and [z3,z4].
inline double segment_overlap_length(const FiniteRTree& t, const Locus& z1, const Locus& z2, const Locus& z3,
                                     const Locus& z4) {
  double c = std::abs(increment_covariance(t, z1, z2, z3, z4));
  return c < 1e-12 ? 0.0 : c;
}

// Poisson points with intensity gamma * length. The ray is included up to
// `ray_len` above the root (capped by the tree's ray).
inline std::vector<Locus> sample_poisson_on_tree(const FiniteRTree& t, double gamma, Stream& rng, double ray_len = 0) {
  if (gamma < 0) throw InputError("poisson intensity must be nonnegative");
  std::vector<Locus> pts;
  if (gamma == 0) return pts;
  for (int v = 0; v < t.size(); ++v) {
    double L = v == t.root() ? std::min(ray_len, t.ray()) : t.length(v);
    if (L <= 0) continue;
    auto k = rng.poisson(gamma * L);
    for (std::uint64_t i = 0; i < k; ++i) pts.push_back({v, rng.uniform() * L});
  }
  return pts;
}

// Quartic bump psi_a(u) = (30/a) (u(a-u)/a^2)^2 on [0,a].
struct SmoothingKernel {
  double a = 1;

  explicit SmoothingKernel(double a_) : a(a_) {
    if (!(a_ > 0)) throw InputError("kernel support must be positive");
  }
  static SmoothingKernel from_gamma(double gamma, double p) {
    if (!(p > 1)) throw ConfigError("smoothing exponent p must exceed 1");
    if (!(gamma > 0)) throw ConfigError("gamma must be positive");
    return SmoothingKernel(std::pow(gamma, -p));
  }

  double operator()(double u) const {
    if (u <= 0 || u >= a) return 0.0;
    double v = u / a;
    return 30.0 / a * v * v * (1 - v) * (1 - v);
  }
  // Integral of psi over (-inf, u].
  double cdf(double u) const {
    if (u <= 0) return 0.0;
    if (u >= a) return 1.0;
    double v = u / a;
    return v * v * v * (10 - 15 * v + 6 * v * v);
  }
};

// RCS Poisson process on a tree. A point at depth q on the ancestral line
// of z (ray points have q < 0) contributes cdf(D - q) - cdf(max(0, -q)) to
// the integral of the smoothed measure over [root, z], D = depth(z).
class RCSField {
 public:
  RCSField(const FiniteRTree& t, std::vector<Locus> points, double gamma, SmoothingKernel k)
      : t_(&t), gamma_(gamma), k_(k), by_edge_(t.size()) {
    if (!(gamma > 0)) throw InputError("gamma must be positive");
    for (const auto& p : points) by_edge_.at(t.canon(p).edge).push_back(t.depth(p));
    for (auto& v : by_edge_) std::sort(v.begin(), v.end());
  }

  double value(const Locus& z0) const {
    Locus z = t_->canon(z0);
    double D = t_->depth(z);
    if (D <= 0) return 0.0;  // only the segment from the root is integrated
    double s = 0;
    auto add = [&](int e, double qmax) {
      for (double q : by_edge_[e]) {
        if (q > qmax + 1e-15) break;
        s += k_.cdf(D - q) - k_.cdf(std::max(0.0, -q));
      }
    };
    add(z.edge, D);
    for (int v = t_->parent(z.edge); v >= 0; v = t_->parent(v)) add(v, D);
    return (s - gamma_ * D) / std::sqrt(gamma_);
  }

  BranchingMap to_map(double spacing) const {
    if (!(spacing > 0)) throw InputError("knot spacing must be positive");
    const auto& t = *t_;
    BranchingMap m{&t, 0.0, std::vector<std::vector<std::pair<double, double>>>(t.size())};
    for (int v : t.order()) {
      if (v == t.root()) continue;
      double L = t.length(v);
      for (double s : knot_grid(L, spacing)) m.knots[v].push_back({s, value({v, L - s})});
    }
    return m;
  }

  double gamma() const { return gamma_; }
  const SmoothingKernel& kernel() const { return k_; }

 private:
  const FiniteRTree* t_;
  double gamma_;
  SmoothingKernel k_;
  std::vector<std::vector<double>> by_edge_;
};

inline double default_knot_spacing(const SmoothingKernel& k) { return std::min(1e-2, k.a / 4); }

inline RCSField rcs_poisson_on_tree(const FiniteRTree& t, const std::vector<Locus>& points, double gamma,
                                    const SmoothingKernel& k) {
  return RCSField(t, points, gamma, k);
}

// Draws N(z) for one locus at depth D > 0 without materializing the bulk:
// points at depth in [0, D - a] contribute exactly 1, so only their count
// is needed; the two boundary zones of width a are sampled explicitly.
inline double rcs_point_marginal(double D, double gamma, const SmoothingKernel& k, Stream& rng) {
  if (!(D > 0)) return 0.0;
  double a = std::min(k.a, D);
  double s = static_cast<double>(rng.poisson(gamma * (D - a)));
  auto top = rng.poisson(gamma * a);  // depth in (D - a, D]
  for (std::uint64_t i = 0; i < top; ++i) s += k.cdf(rng.uniform() * a);
  auto low = rng.poisson(gamma * k.a);  // ray points, depth in (-a, 0)
  for (std::uint64_t i = 0; i < low; ++i) {
    double u = rng.uniform() * k.a;  // height above the root
    s += k.cdf(D + u) - k.cdf(u);
  }
  return (s - gamma * D) / std::sqrt(gamma);
}

// Line version: P(t) = lambda^{-1/2} (int_0^t psi*mu(s) ds - lambda t) on a
// grid of n+1 times in [0,T]; points are drawn on [-a, T].
inline std::vector<double> rcs_poisson_line(double lambda, const SmoothingKernel& k, double T, int n, Stream& rng) {
  if (!(lambda > 0) || !(T > 0) || n < 1) throw InputError("rcs_poisson_line: bad parameters");
  auto cnt = rng.poisson(lambda * (T + k.a));
  std::vector<double> r(cnt);
  for (auto& x : r) x = -k.a + rng.uniform() * (T + k.a);
  std::sort(r.begin(), r.end());
  std::vector<double> out(n + 1);
  for (int i = 0; i <= n; ++i) {
    double t = T * i / n, s = 0;
    for (double q : r) {
      if (q > t) break;
      s += k.cdf(t - q) - k.cdf(-q);
    }
    out[i] = (s - lambda * t) / std::sqrt(lambda);
  }
  return out;
}

// One increment P(s+h) - P(s) of the stationary line process.
inline double rcs_line_increment(double lambda, const SmoothingKernel& k, double h, Stream& rng) {
  auto cnt = rng.poisson(lambda * (h + k.a));
  double s = 0;
  for (std::uint64_t i = 0; i < cnt; ++i) {
    double q = -k.a + rng.uniform() * (h + k.a);  // increment over [0, h]
    s += k.cdf(h - q) - k.cdf(-q);
  }
  return (s - lambda * h) / std::sqrt(lambda);
}

struct TailFit {
  double slope = 0;   // of log P(|Z| > u) against u^q
  double C = 0;       // (-1/slope)^{1/q}
  double r2 = 0;
  std::size_t n = 0;
  bool flagged = false;  // too few samples or degenerate data
};

// Fits log P(|Z| > u) against u^q over the upper half of the sample.
inline TailFit orlicz_tail_estimate(const std::vector<double>& z, double q) {
  TailFit f;
  f.n = z.size();
  if (!(q > 0)) throw InputError("orlicz_tail_estimate: q must be positive");
  if (z.size() < 1000) {
    f.flagged = true;
    return f;
  }
  std::vector<double> a(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::abs(z[i]);
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  std::vector<double> xs, ys;
  double last = -1;
  for (int i = 0; i <= 40; ++i) {
    double p = 0.5 * std::pow(20.0 / n, i / 40.0);  // tail probability from 0.5 down to 20/n
    double u = quantile_sorted(a, 1 - p);
    if (u <= last * (1 + 1e-12)) continue;
    last = u;
    auto above = a.end() - std::upper_bound(a.begin(), a.end(), u);
    if (above < 10) break;
    xs.push_back(std::pow(u, q));
    ys.push_back(std::log(above / n));
  }
  if (xs.size() < 4) {
    f.flagged = true;
    return f;
  }
  auto lf = linear_fit(xs, ys);
  f.slope = lf.slope;
  f.r2 = lf.r2;
  f.C = lf.slope < 0 ? std::pow(-1.0 / lf.slope, 1.0 / q) : 0.0;
  if (!(lf.slope < 0)) f.flagged = true;
  return f;
}

// Empirical phi_1 norm: the c solving mean(exp(|z|/c)) = 2.
inline double empirical_orlicz_norm(const std::vector<double>& z) {
  double m = 0;
  for (double v : z) m = std::max(m, std::abs(v));
  if (m == 0) return 0.0;
  auto g = [&](double c) {
    std::vector<double> e(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) e[i] = std::exp(std::abs(z[i]) / c - m / c);
    return std::log(pairwise_sum(e.data(), e.size()) / z.size()) + m / c;  // log mean exp(|z|/c)
  };
  double lo = m * 1e-6, hi = m;
  while (g(hi) > std::log(2.0)) hi *= 2;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    (g(mid) > std::log(2.0) ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace bcastle
