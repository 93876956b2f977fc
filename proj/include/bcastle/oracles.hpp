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

// Reference laws: heat kernel, Levy and Cauchy families, Karlin-McGregor
// survival and first-exit determinants, the two-point characteristic
// function and the n-point characteristic-function recursion.
//
// Conventions. Paths are independent standard Brownian motions (generator
// half the Laplacian). Two paths at distance d have a difference of
// variance 2, so their meeting time has density d (4 pi s^3)^{-1/2}
// exp(-d^2 / 4s), i.e. Levy(0, d^2/2).

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <numeric>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "bcastle/errors.hpp"

namespace bcastle {

// Scale constant of the two-point law Cauchy(0, kappa |x - y|).
//
// Derivation: the gap-d meeting time tau is Levy(0, d^2/2), whose Laplace
// transform is E exp(-lambda tau) = exp(-d sqrt(lambda)). Given tau the
// increment is N(0, 2 tau) (two private unit-rate Brownian pieces of length
// tau). Hence E exp(i a H) = E exp(-a^2 tau) = exp(-|a| d).
inline constexpr double kKappa = 1.0;
// Competing constants used only for logging against the Monte Carlo fit.
inline constexpr double kKappaStated = 2.0;
inline const double kKappaAlt = std::sqrt(2.0);

struct HeatValue {
  double p, dp;
};

inline HeatValue heat_kernel(double t, double u) {
  if (!(t > 0)) throw DomainError("heat_kernel: t must be positive");
  double p = std::exp(-u * u / (2 * t)) / std::sqrt(2 * std::numbers::pi * t);
  return {p, -(u / t) * p};
}

// Meeting time of two standard Brownian motions started at distance d.
inline double first_passage_density(double s, double d) {
  if (s <= 0) return 0.0;
  d = std::abs(d);
  return d / std::sqrt(4 * std::numbers::pi * s * s * s) * std::exp(-d * d / (4 * s));
}
inline double first_passage_cdf(double s, double d) {
  if (s <= 0) return 0.0;
  return std::erfc(std::abs(d) / (2 * std::sqrt(s)));
}

// ---- Levy and Cauchy closed forms ----

inline void check_scale(double c) {
  if (!(c > 0)) throw DomainError("scale must be positive");
}
inline double levy_pdf(double c, double x) {
  check_scale(c);
  if (x <= 0) return 0.0;
  return std::sqrt(c / (2 * std::numbers::pi)) * std::exp(-c / (2 * x)) / std::pow(x, 1.5);
}
inline double levy_cdf(double c, double x) {
  check_scale(c);
  return x <= 0 ? 0.0 : std::erfc(std::sqrt(c / (2 * x)));
}
inline double levy_laplace(double c, double lambda) {
  check_scale(c);
  return std::exp(-std::sqrt(2 * c * lambda));
}
inline double cauchy_pdf(double g, double x) {
  check_scale(g);
  return 1.0 / (std::numbers::pi * g * (1 + (x / g) * (x / g)));
}
inline double cauchy_cdf(double g, double x) {
  check_scale(g);
  return 0.5 + std::atan(x / g) / std::numbers::pi;
}
inline double cauchy_charfn(double g, double a) {
  check_scale(g);
  return std::exp(-g * std::abs(a));
}
inline double cauchy_quantile(double g, double u) {
  check_scale(g);
  return g * std::tan(std::numbers::pi * (u - 0.5));
}

// E exp(i a (h(y) - h(x))) for the stationary castle with |x - y| = d.
inline double two_point_charfn(double a, double d) { return std::exp(-kKappa * std::abs(a) * std::abs(d)); }

// ---- Determinants ----

// Determinant by LU with partial pivoting; m is row-major n x n and is overwritten.
inline double det_lu(std::vector<double>& m, int n) {
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
    if (m[piv * n + c] == 0.0) return 0.0;
    if (piv != c) {
      for (int k = 0; k < n; ++k) std::swap(m[c * n + k], m[piv * n + k]);
      det = -det;
    }
    det *= m[c * n + c];
    for (int r = c + 1; r < n; ++r) {
      double f = m[r * n + c] / m[c * n + c];
      for (int k = c; k < n; ++k) m[r * n + k] -= f * m[c * n + k];
    }
  }
  return det;
}

inline void require_increasing(const std::vector<double>& v, const char* what) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw InputError(std::string(what) + " must be strictly increasing");
}

// det[p_t(y_k - x_i)]: density of surviving in the Weyl chamber at y.
inline double km_survival_density(double t, const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) throw InputError("km_survival_density: size mismatch");
  require_increasing(x, "x");
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] < y[i - 1]) throw InputError("y must be sorted");  // ties give a zero determinant
  int n = static_cast<int>(x.size());
  std::vector<double> m(n * n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) m[i * n + k] = heat_kernel(t, y[k] - x[i]).p;
  return det_lu(m, n);
}

// Joint density of (first meeting time t, meeting pair j, positions y).
// y has n-1 entries; y[j-1] is where paths j and j+1 meet. Returns -det M^j_t,
// which is the probability flux out of the chamber (nonnegative).
inline double first_coalescence_density(double t, int j, const std::vector<double>& x, const std::vector<double>& y) {
  int n = static_cast<int>(x.size());
  if (n < 2 || static_cast<int>(y.size()) != n - 1) throw InputError("first_coalescence_density: size mismatch");
  if (j < 1 || j > n - 1) throw InputError("first_coalescence_density: j out of range");
  require_increasing(x, "x");
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] < y[i - 1]) throw InputError("y must be sorted");
  std::vector<double> m(n * n);
  for (int i = 0; i < n; ++i)
    for (int k = 1; k <= n; ++k) {
      double v;
      if (k < j) v = heat_kernel(t, y[k - 1] - x[i]).p;
      else if (k == j) v = heat_kernel(t, y[j - 1] - x[i]).dp;
      else v = heat_kernel(t, y[k - 2] - x[i]).p;
      m[i * n + (k - 1)] = v;
    }
  return -det_lu(m, n);
}

// ---- Quadrature over (t, exit position) ----

struct QuadConfig {
  int t_nodes = 16;             // Gauss-Legendre nodes per log-time panel
  double panels_per_efold = 2;  // log-time panels per unit of ln t
  int y_nodes = 12;             // nodes per spatial panel
  double y_panel_sigma = 1.2;   // spatial panel width in units of sqrt(t)
  int max_y_panels = 48;
  double y_reach = 9.0;         // spatial window: [x_1 - reach sqrt t, x_n + reach sqrt t]
  double t_min_factor = 1.0 / 200;  // t_lo = factor * (smallest gap)^2
};

class GLTable {
 public:
  explicit GLTable(int n) : n_(n), tab_(gsl_integration_glfixed_table_alloc(n), &gsl_integration_glfixed_table_free) {
    if (!tab_) throw InputError("Gauss-Legendre table allocation failed");
  }
  int size() const { return n_; }
  // Node i mapped to [a,b].
  std::pair<double, double> point(double a, double b, int i) const {
    double xi, wi;
    gsl_integration_glfixed_point(a, b, static_cast<std::size_t>(i), &xi, &wi, tab_.get());
    return {xi, wi};
  }

 private:
  int n_;
  std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)> tab_;
};

inline std::vector<std::pair<double, double>> gl_panels(const GLTable& tab, double a, double b, int panels) {
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(panels) * tab.size());
  for (int p = 0; p < panels; ++p) {
    double lo = a + (b - a) * p / panels, hi = a + (b - a) * (p + 1) / panels;
    for (int i = 0; i < tab.size(); ++i) out.push_back(tab.point(lo, hi, i));
  }
  return out;
}

// Nodes and weights for t in [t_lo, t_hi] on log-spaced panels; weights include dt = t ds.
inline std::vector<std::pair<double, double>> log_time_nodes(double t_lo, double t_hi, const QuadConfig& q) {
  GLTable tab(q.t_nodes);
  double s0 = std::log(t_lo), s1 = std::log(t_hi);
  int panels = std::max(1, static_cast<int>(std::ceil((s1 - s0) * q.panels_per_efold)));
  auto ns = gl_panels(tab, s0, s1, panels);
  for (auto& [s, w] : ns) {
    double t = std::exp(s);
    w *= t;
    s = t;
  }
  return ns;
}

// Integrates g(t, j, y) * first_coalescence_density(t, j, x, y) over
// t in [t_lo, t_hi], j, and the ordered exit positions. n in {2, 3}.
// g returns a double; it is evaluated once per quadrature node.
template <class G>
double integrate_first_exit(const std::vector<double>& x, double t_lo, double t_hi, G&& g, const QuadConfig& q = {}) {
  const int n = static_cast<int>(x.size());
  if (n != 2 && n != 3) throw InputError("integrate_first_exit: n must be 2 or 3");
  require_increasing(x, "x");
  GLTable ytab(q.y_nodes);
  double total = 0.0;
  std::vector<double> P, D;  // P[i*N + node] = p_t(node - x_i), D likewise for p'
  for (auto [t, wt] : log_time_nodes(t_lo, t_hi, q)) {
    double sig = std::sqrt(t);
    double lo = x.front() - q.y_reach * sig, hi = x.back() + q.y_reach * sig;
    int panels = std::clamp(static_cast<int>(std::ceil((hi - lo) / (q.y_panel_sigma * sig))), 1, q.max_y_panels);
    auto nodes = gl_panels(ytab, lo, hi, panels);
    const int N = static_cast<int>(nodes.size());
    P.assign(static_cast<std::size_t>(n) * N, 0.0);
    D.assign(static_cast<std::size_t>(n) * N, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < N; ++k) {
        auto h = heat_kernel(t, nodes[k].first - x[i]);
        P[i * N + k] = h.p;
        D[i * N + k] = h.dp;
      }
    double acc = 0.0;
    if (n == 2) {
      for (int k = 0; k < N; ++k) {
        double det = D[k] * P[N + k] - D[N + k] * P[k];
        double y[2] = {nodes[k].first, nodes[k].first};  // second slot unused
        acc += nodes[k].second * (-det) * g(t, 1, y);
      }
    } else {
      const int nb = q.y_nodes;
      std::array<double, 3> p1, d1, p2, d2;
      auto flux = [&](double y1, double y2, const std::array<double, 3>& a1, const std::array<double, 3>& b1,
                      const std::array<double, 3>& a2, const std::array<double, 3>& b2) {
        // j = 1: columns (p'(y1), p(y1), p(y2)); j = 2: (p(y1), p'(y2), p(y2))
        auto det3 = [](const std::array<double, 3>& c0, const std::array<double, 3>& c1, const std::array<double, 3>& c2) {
          return c0[0] * (c1[1] * c2[2] - c1[2] * c2[1]) - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1]) +
                 c2[0] * (c0[1] * c1[2] - c0[2] * c1[1]);
        };
        double yy[2] = {y1, y2};
        double f1 = -det3(b1, a1, a2), f2 = -det3(a1, b2, a2);
        double s = 0.0;
        if (f1 != 0.0) s += f1 * g(t, 1, yy);
        if (f2 != 0.0) s += f2 * g(t, 2, yy);
        return s;
      };
      for (int k1 = 0; k1 < N; ++k1) {
        double y1 = nodes[k1].first, w1 = nodes[k1].second;
        for (int i = 0; i < 3; ++i) {
          p1[i] = P[i * N + k1];
          d1[i] = D[i * N + k1];
        }
        int panel = k1 / nb;
        double pend = lo + (hi - lo) * (panel + 1) / panels;
        // partial panel (y1, pend]
        for (int i2 = 0; i2 < nb; ++i2) {
          auto [y2, w2] = ytab.point(y1, pend, i2);
          for (int i = 0; i < 3; ++i) {
            auto h = heat_kernel(t, y2 - x[i]);
            p2[i] = h.p;
            d2[i] = h.dp;
          }
          acc += w1 * w2 * flux(y1, y2, p1, d1, p2, d2);
        }
        for (int k2 = (panel + 1) * nb; k2 < N; ++k2) {
          for (int i = 0; i < 3; ++i) {
            p2[i] = P[i * N + k2];
            d2[i] = D[i * N + k2];
          }
          acc += w1 * nodes[k2].second * flux(y1, nodes[k2].first, p1, d1, p2, d2);
        }
      }
    }
    total += wt * acc;
  }
  return total;
}

inline double min_gap(const std::vector<double>& x) {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < x.size(); ++i) g = std::min(g, x[i] - x[i - 1]);
  return g;
}

// Total first-exit mass on t in (0, t_hi]; tends to 1 as t_hi grows.
inline double first_exit_mass(const std::vector<double>& x, double t_hi, const QuadConfig& q = {}) {
  double g = min_gap(x);
  return integrate_first_exit(x, q.t_min_factor * g * g, t_hi, [](double, int, const double*) { return 1.0; }, q);
}

// Probability of no meeting before time t, by integrating the survival
// determinant over the chamber (n in {2, 3}).
inline double km_survival_mass(const std::vector<double>& x, double t, const QuadConfig& q = {}) {
  const int n = static_cast<int>(x.size());
  require_increasing(x, "x");
  GLTable tab(q.y_nodes);
  double sig = std::sqrt(t);
  double lo = x.front() - q.y_reach * sig, hi = x.back() + q.y_reach * sig;
  int panels = std::clamp(static_cast<int>(std::ceil((hi - lo) / (q.y_panel_sigma * sig))), 1, q.max_y_panels);
  auto nodes = gl_panels(tab, lo, hi, panels);
  double acc = 0.0;
  if (n == 2) {
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      auto [y1, w1] = nodes[a];
      auto inner = gl_panels(tab, y1, hi, std::max(1, static_cast<int>(std::ceil((hi - y1) / (q.y_panel_sigma * sig)))));
      for (auto [y2, w2] : inner) acc += w1 * w2 * km_survival_density(t, x, {y1, y2});
    }
    return acc;
  }
  if (n == 3) {
    for (auto [y1, w1] : nodes) {
      auto mid = gl_panels(tab, y1, hi, std::max(1, static_cast<int>(std::ceil((hi - y1) / (q.y_panel_sigma * sig)))));
      for (auto [y2, w2] : mid) {
        auto in = gl_panels(tab, y2, hi, std::max(1, static_cast<int>(std::ceil((hi - y2) / (q.y_panel_sigma * sig)))));
        for (auto [y3, w3] : in) acc += w1 * w2 * w3 * km_survival_density(t, x, {y1, y2, y3});
      }
    }
    return acc;
  }
  throw InputError("km_survival_mass: n must be 2 or 3");
}

// ---- Characteristic-function recursion ----

struct CharFnResult {
  std::complex<double> value;
  double t_max = 0;
  bool converged = true;
};

// Coefficients after paths j and j+1 (1-based) merge.
inline std::vector<double> merge_coeffs(const std::vector<double>& alpha, int j) {
  std::vector<double> out;
  for (int i = 0; i < static_cast<int>(alpha.size()); ++i) {
    if (i == j) continue;
    out.push_back(i == j - 1 ? alpha[i] + alpha[i + 1] : alpha[i]);
  }
  return out;
}

// F_n(alpha, x) = E exp(i sum_j alpha_j h(x_j)) for the stationary castle,
// sum alpha = 0, x increasing, n <= 3. Evaluated through the recursion on
// the first meeting; the two-path factor inside is the closed form.
inline CharFnResult recursion_charfn(const std::vector<double>& alpha, const std::vector<double>& x,
                                     const QuadConfig& q = {}) {
  const int n = static_cast<int>(x.size());
  if (static_cast<int>(alpha.size()) != n || n < 1) throw InputError("recursion_charfn: size mismatch");
  if (n > 3) throw InputError("recursion_charfn: n <= 3 supported");
  double sum = 0, norm2 = 0, scale = 0;
  for (double a : alpha) {
    sum += a;
    norm2 += a * a;
    scale = std::max(scale, std::abs(a));
  }
  if (std::abs(sum) > 1e-12 * std::max(1.0, scale)) throw InputError("recursion_charfn: coefficients must sum to 0");
  require_increasing(x, "x");
  if (n == 1 || norm2 == 0.0) return {1.0, 0.0, true};
  if (n == 2) {
    // the recursion with F_1 = 1 integrates exp(-|alpha|^2 t / 2) against the exit law
    double g = x[1] - x[0];
    double t_hi = 46.0 / (0.5 * norm2);
    double v = integrate_first_exit(
        x, q.t_min_factor * g * g, t_hi, [&](double t, int, const double*) { return std::exp(-0.5 * norm2 * t); }, q);
    return {v, t_hi, true};
  }
  double g = min_gap(x);
  double t_hi = 46.0 / (0.5 * norm2);
  auto c1 = merge_coeffs(alpha, 1), c2 = merge_coeffs(alpha, 2);
  double b1 = std::abs(c1[0]), b2 = std::abs(c2[0]);
  double v = integrate_first_exit(
      x, q.t_min_factor * g * g, t_hi,
      [&](double t, int j, const double* y) {
        double b = j == 1 ? b1 : b2;
        return std::exp(-0.5 * norm2 * t - kKappa * b * (y[1] - y[0]));
      },
      q);
  return {v, t_hi, std::abs(v) <= 1.0 + 1e-6};
}

// Mass of the first-exit law of three paths on a (t, y_j) rectangle, where
// y_j is the meeting position of pair j; the other exit coordinate is
// integrated out.
inline double first_exit_bin_mass(const std::vector<double>& x, int j, double t0, double t1, double y0, double y1,
                                  int nodes = 8) {
  if (x.size() != 3) throw InputError("first_exit_bin_mass: three paths");
  GLTable tab(nodes), itab(16);
  double acc = 0.0;
  for (int a = 0; a < nodes; ++a) {
    auto [t, wt] = tab.point(t0, t1, a);
    double sig = std::sqrt(t);
    for (int b = 0; b < nodes; ++b) {
      auto [ym, wy] = tab.point(y0, y1, b);
      // other coordinate: above ym for j = 1, below for j = 2
      double far = j == 1 ? std::max(ym, x.back()) + 9 * sig : std::min(ym, x.front()) - 9 * sig;
      int panels = std::clamp(static_cast<int>(std::ceil(std::abs(far - ym) / sig)), 1, 40);
      double inner = 0.0;
      for (auto [yo, wo] : gl_panels(itab, std::min(ym, far), std::max(ym, far), panels)) {
        std::vector<double> y = j == 1 ? std::vector<double>{ym, yo} : std::vector<double>{yo, ym};
        inner += wo * first_coalescence_density(t, j, x, y);
      }
      acc += wt * wy * inner;
    }
  }
  return acc;
}

}  // namespace bcastle
