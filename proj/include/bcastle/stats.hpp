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

// Statistical tools: KS tests, Cauchy scale fitting, empirical
// characteristic functions, log-log exponent fits and the report record
// shared by the verification suites.

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/statistics/linear_regression.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "bcastle/errors.hpp"
#include "bcastle/rng.hpp"

namespace bcastle {

struct TestReport {
  std::string name;
  double value = 0;
  double threshold = 0;
  bool pass = false;
  std::size_t n = 0;
  std::vector<std::uint64_t> seeds;
  double se = 0;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const {
    return {{"name", name}, {"value", value}, {"threshold", threshold}, {"pass", pass},
            {"n", n},       {"seeds", seeds}, {"se", se},               {"extra", extra}};
  }
};

// Pairwise summation keeps the aggregate independent of accumulation order
// up to rounding that does not grow with n.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 16) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

struct MeanSE {
  double mean = 0, se = 0;
};

inline MeanSE mean_se(const std::vector<double>& v) {
  if (v.empty()) return {};
  double m = pairwise_sum(v.data(), v.size()) / v.size();
  std::vector<double> d(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - m) * (v[i] - m);
  double var = v.size() > 1 ? pairwise_sum(d.data(), d.size()) / (v.size() - 1) : 0.0;
  return {m, std::sqrt(var / v.size())};
}

// Empirical quantile with linear interpolation (type 7); `sorted` ascending.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw InputError("quantile of empty sample");
  double h = (sorted.size() - 1) * std::clamp(q, 0.0, 1.0);
  std::size_t i = static_cast<std::size_t>(std::floor(h));
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (h - i) * (sorted[i + 1] - sorted[i]);
}

// ---- Kolmogorov-Smirnov ----

// P(K > lambda) for the limiting Kolmogorov distribution.
inline double kolmogorov_pvalue(double lambda) {
  if (lambda <= 0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double s = 0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    s += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

struct KSResult {
  double stat = 0;
  double pvalue = 1;
  double n_eff = 0;
  double se = 0;     // approximate standard error of the statistic
  bool flagged = false;  // too few samples for the asymptotics
};

inline double ks_se(double n_eff, double F) {
  if (n_eff <= 0) return 0;
  return std::max(0.26, std::sqrt(std::max(0.0, F * (1 - F)))) / std::sqrt(n_eff);
}

inline KSResult ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
  KSResult r;
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  r.flagged = x.size() < 100;
  if (x.empty()) return r;
  double Fat = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double F = cdf(x[i]);
    double d = std::max(F - i / n, (i + 1) / n - F);
    if (d > r.stat) {
      r.stat = d;
      Fat = F;
    }
  }
  r.n_eff = n;
  r.pvalue = kolmogorov_pvalue((std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * r.stat);
  r.se = ks_se(n, Fat);
  return r;
}

inline KSResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  KSResult r;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  r.flagged = a.size() < 100 || b.size() < 100;
  if (a.empty() || b.empty()) return r;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double Fat = 0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    double d = std::abs(i / na - j / nb);
    if (d > r.stat) {
      r.stat = d;
      Fat = 0.5 * (i / na + j / nb);
    }
  }
  r.n_eff = na * nb / (na + nb);
  double sq = std::sqrt(r.n_eff);
  r.pvalue = kolmogorov_pvalue((sq + 0.12 + 0.11 / sq) * r.stat);
  r.se = ks_se(r.n_eff, Fat);
  return r;
}

// ---- Cauchy scale ----

struct CauchyFit {
  double scale = 0, location = 0;
  double ci_lo = 0, ci_hi = 0;
  double tail_ratio = 0;   // empirical / Cauchy probability of |X - m| > 10 scale
  bool tail_flag = false;  // tails inconsistent with a Cauchy law
};

// Scale from the interquartile range (quartiles of Cauchy(m, g) are m +- g);
// percentile bootstrap for the interval.
inline CauchyFit cauchy_scale_fit(const std::vector<double>& x, std::uint64_t seed = 0, int boot = 200) {
  if (x.size() < 2) throw InputError("cauchy_scale_fit: need samples");
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  CauchyFit f;
  f.location = quantile_sorted(s, 0.5);
  f.scale = 0.5 * (quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25));
  std::vector<double> bs(boot), tmp(x.size());
  for (int b = 0; b < boot; ++b) {
    Stream rng(seed, 0xB007 + b);
    for (auto& v : tmp) v = x[rng() % x.size()];
    std::sort(tmp.begin(), tmp.end());
    bs[b] = 0.5 * (quantile_sorted(tmp, 0.75) - quantile_sorted(tmp, 0.25));
  }
  std::sort(bs.begin(), bs.end());
  f.ci_lo = boot ? quantile_sorted(bs, 0.025) : f.scale;
  f.ci_hi = boot ? quantile_sorted(bs, 0.975) : f.scale;
  if (f.scale > 0) {
    double cnt = 0;
    for (double v : x) cnt += std::abs(v - f.location) > 10 * f.scale;
    double expect = 1.0 - 2.0 * std::atan(10.0) / std::numbers::pi;
    f.tail_ratio = cnt / x.size() / expect;
    f.tail_flag = f.tail_ratio < 0.5 || f.tail_ratio > 2.0;
  } else {
    f.tail_flag = true;
  }
  return f;
}

// ---- Empirical characteristic function ----

struct CharFnPoint {
  double a, re, im, se_re, se_im;
};

inline std::vector<CharFnPoint> empirical_charfn(const std::vector<double>& x, const std::vector<double>& agrid) {
  std::vector<CharFnPoint> out;
  std::vector<double> c(x.size()), s(x.size());
  for (double a : agrid) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      c[i] = std::cos(a * x[i]);
      s[i] = std::sin(a * x[i]);
    }
    auto mc = mean_se(c), ms = mean_se(s);
    out.push_back({a, mc.mean, ms.mean, mc.se, ms.se});
  }
  return out;
}

// ---- Linear and power-law fits ----

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
  double se = 0, ci_lo = 0, ci_hi = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("linear_fit: need >= 2 matched points");
  LinearFit f;
  auto [c0, c1, r2] = boost::math::statistics::simple_ordinary_least_squares_with_R_squared(x, y);
  f.intercept = c0;
  f.slope = c1;
  f.r2 = std::isfinite(r2) ? r2 : 1.0;
  const std::size_t n = x.size();
  if (n > 2) {
    double mx = 0;
    for (double v : x) mx += v;
    mx /= n;
    double sxx = 0, sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sxx += (x[i] - mx) * (x[i] - mx);
      double r = y[i] - (c0 + c1 * x[i]);
      sse += r * r;
    }
    f.se = sxx > 0 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
    boost::math::students_t dist(static_cast<double>(n - 2));
    double q = boost::math::quantile(boost::math::complement(dist, 0.025));
    f.ci_lo = f.slope - q * f.se;
    f.ci_hi = f.slope + q * f.se;
  } else {
    f.ci_lo = f.ci_hi = f.slope;
  }
  return f;
}

// Slope of log(value) against log(scale).
inline LinearFit exponent_fit(const std::vector<double>& scale, const std::vector<double>& value) {
  if (scale.size() != value.size() || scale.size() < 4) throw InputError("exponent_fit: need >= 4 scales");
  double lo = *std::min_element(scale.begin(), scale.end()), hi = *std::max_element(scale.begin(), scale.end());
  if (!(lo > 0) || hi / lo < 4.0) throw InputError("exponent_fit: scales must be positive and span >= 2 octaves");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < scale.size(); ++i) {
    if (!(value[i] > 0)) throw InputError("exponent_fit: values must be positive");
    lx.push_back(std::log(scale[i]));
    ly.push_back(std::log(value[i]));
  }
  return linear_fit(lx, ly);
}

}  // namespace bcastle
