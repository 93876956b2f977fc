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

// Law-level experiments that tie the discrete web to the continuum castle:
// the 0-BD -> BC convergence series and the scale-sweep statistic that
// separates the castle from a Cauchy process with independent increments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"

#include "bcastle/bc_sampler.hpp"
#include "bcastle/discrete_web.hpp"
#include "bcastle/errors.hpp"
#include "bcastle/oracles.hpp"
#include "bcastle/rng.hpp"
#include "bcastle/stats.hpp"

namespace bcastle {

// ---- convergence ----

struct ConvergenceConfig {
  std::vector<double> deltas{0.1, 0.05, 0.02};
  double T = 1.0;
  double x0 = 0.0, x1 = 1.0;
  std::size_t replicas = 10000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double ks_threshold = 0.05;
  double trend_se = 2.0;
  SamplerConfig bc{};
};

struct ConvergencePoint {
  double delta = 0;
  KSResult ks;
  std::size_t enlargements = 0;
};

struct ConvergenceResult {
  std::vector<ConvergencePoint> series;
  bool nonincreasing = true;
  bool final_ok = false;
  TestReport report;
};

inline long dots_above(const WebPath& p, const EventField& f, double m) {
  long c = 0;
  for (const auto& s : p.segs) {
    if (s.hi <= m) break;
    c += s.lo >= m ? s.dots : f.dots(s.site, m, s.hi);
  }
  return c;
}

// h(T, x0) - h(T, x1) for the 0-BD from flat data: only dots above the
// meeting time of the two backward walks contribute.
inline double bd_flat_increment(const EventField& f, double T, long k0, long k1) {
  if (k0 == k1) return 0.0;
  auto a = backward_walk(f, T, k0, 0.0), b = backward_walk(f, T, k1, 0.0);
  double m = meeting_time(a, b).value_or(0.0);
  return f.delta() * static_cast<double>(dots_above(a, f, m) - dots_above(b, f, m));
}

inline double bc_flat_increment(double T, double x0, double x1, const SamplerConfig& cfg, Stream& rng) {
  if (x0 == x1) return 0.0;
  BCQuery q;
  q.points = {{T, x0}, {T, x1}};
  auto F = sample_coalescing_forest(q, cfg, rng);
  auto v = evaluate_bc(F, q.ic, rng);
  return v[0] - v[1];
}

inline ConvergenceResult convergence_experiment(const ConvergenceConfig& c) {
  for (std::size_t i = 1; i < c.deltas.size(); ++i)
    if (!(c.deltas[i] < c.deltas[i - 1])) throw InputError("convergence: delta list must decrease");
  if (c.deltas.empty() || c.replicas == 0) throw InputError("convergence: empty run");
  ConvergenceResult R;
  auto bc = replicate<double>(c.replicas, make_key({c.seed, 0xBC}), c.workers,
                              [&](Stream& s, std::size_t) { return bc_flat_increment(c.T, c.x0, c.x1, c.bc, s); });
  for (std::size_t di = 0; di < c.deltas.size(); ++di) {
    double d = c.deltas[di];
    long k0 = std::lround(c.x0 / d), k1 = std::lround(c.x1 / d);
    long span = std::lround(6.0 * std::sqrt(c.T) / d) + 2;
    WebWindow w0{0.0, c.T, std::min(k0, k1) - span, std::max(k0, k1) + span};
    std::vector<char> enlarged(c.replicas, 0);
    std::vector<double> bd(c.replicas);
    parallel_for(c.replicas, c.workers, [&](std::size_t i) {
      std::uint64_t key = make_key({c.seed, 0xBD, di, i});
      bd[i] = with_enlargement(w0, 6, [&](WebWindow w) {
        if (w.site_lo != w0.site_lo) enlarged[i] = 1;
        w.t0 = 0.0;  // walks stop at time 0 whatever the window depth
        return bd_flat_increment(EventField(d, w, key), c.T, k0, k1);
      });
    });
    ConvergencePoint p{d, ks_two_sample(bd, bc), 0};
    for (char e : enlarged) p.enlargements += e;
    R.series.push_back(p);
  }
  for (std::size_t i = 1; i < R.series.size(); ++i) {
    const auto &a = R.series[i - 1].ks, &b = R.series[i].ks;
    if (b.stat > a.stat + c.trend_se * std::hypot(a.se, b.se)) R.nonincreasing = false;
  }
  R.final_ok = R.series.back().ks.stat <= c.ks_threshold;
  auto& rep = R.report;
  rep.name = "bd_to_bc_convergence";
  rep.value = R.series.back().ks.stat;
  rep.threshold = c.ks_threshold;
  rep.pass = R.final_ok && R.nonincreasing;
  rep.n = c.replicas;
  rep.seeds = {c.seed};
  rep.se = R.series.back().ks.se;
  nlohmann::json s = nlohmann::json::array();
  for (const auto& p : R.series)
    s.push_back({{"delta", p.delta}, {"ks", p.ks.stat}, {"se", p.ks.se}, {"p", p.ks.pvalue}, {"enlarged", p.enlargements}});
  rep.extra = {{"series", s}, {"nonincreasing", R.nonincreasing}};
  return R;
}

// ---- singularity statistic ----

enum class ProcessKind { Castle, Cauchy };

using ScaleFunctional = std::function<double(const std::vector<double>&)>;

inline double phi_default(const std::vector<double>& v) { return std::cos(v.at(0)) * std::cos(v.at(1)); }
inline double phi_skew(const std::vector<double>& v) { return std::cos(2 * v.at(0) - v.at(1)); }

struct SingularityConfig {
  ProcessKind process = ProcessKind::Castle;
  std::vector<double> x{1.0, 0.75, 0.5};  // x0 > x1 > ... in [1/2, 1]
  std::vector<double> lambdas{1.0};
  ScaleFunctional phi = phi_default;
  std::size_t replicas = 100000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double kappa = kKappa;
  SamplerConfig bc{};
};

struct SingularityResult {
  MeanSE estimate;
  std::vector<double> samples;  // Phi_n per replica
};

inline void check_singularity_config(const SingularityConfig& c) {
  if (c.x.size() < 2) throw InputError("singularity: need x0 and at least one more point");
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    if (c.x[i] > 1.0 || c.x[i] < 0.5) throw InputError("singularity: points must lie in [1/2, 1]");
    if (i && !(c.x[i] < c.x[i - 1])) throw InputError("singularity: points must decrease");
  }
  if (c.lambdas.empty() || c.lambdas.front() <= 0) throw InputError("singularity: bad scale list");
  for (std::size_t k = 1; k < c.lambdas.size(); ++k)
    if (c.lambdas[k] < 4 * c.lambdas[k - 1]) throw InputError("singularity: scales must grow by a factor >= 4");
}

// One joint sample of H at the given positions (relative values).
inline std::vector<double> process_sample(ProcessKind kind, const std::vector<double>& pos, double kappa,
                                          const SamplerConfig& cfg, Stream& rng) {
  if (kind == ProcessKind::Castle) {
    auto inc = stationary_increments(pos, cfg, rng);
    std::vector<double> h{0.0};
    h.insert(h.end(), inc.begin(), inc.end());
    return h;
  }
  // independent Cauchy increments between sorted positions
  std::vector<std::size_t> ord(pos.size());
  for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
  std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return pos[a] < pos[b]; });
  std::vector<double> h(pos.size(), 0.0);
  for (std::size_t i = 1; i < ord.size(); ++i) {
    double g = kappa * (pos[ord[i]] - pos[ord[i - 1]]);
    h[ord[i]] = h[ord[i - 1]] + (g > 0 ? cauchy_quantile(g, rng.uniform()) : 0.0);
  }
  return h;
}

inline SingularityResult singularity_statistic(const SingularityConfig& c) {
  check_singularity_config(c);
  const std::size_t m = c.x.size();
  std::vector<double> pos;
  for (double lam : c.lambdas)
    for (double x : c.x) pos.push_back(x / lam);
  SingularityResult R;
  R.samples = replicate<double>(c.replicas, make_key({c.seed, 0x51, static_cast<std::uint64_t>(c.process)}), c.workers,
                                [&](Stream& s, std::size_t) {
                                  auto h = process_sample(c.process, pos, c.kappa, c.bc, s);
                                  double acc = 0;
                                  for (std::size_t k = 0; k < c.lambdas.size(); ++k) {
                                    std::vector<double> I(m - 1);
                                    for (std::size_t i = 1; i < m; ++i)
                                      I[i - 1] = c.lambdas[k] * (h[k * m + i] - h[k * m]);
                                    acc += c.phi(I);
                                  }
                                  return acc / static_cast<double>(c.lambdas.size());
                                });
  R.estimate = mean_se(R.samples);
  return R;
}

// E cos(I1) cos(I2) for independent Cauchy increments with scales kappa*g.
inline double cauchy_default_closed_form(const std::vector<double>& x, double kappa = kKappa) {
  if (x.size() != 3) throw InputError("closed form needs three points");
  double g1 = x[0] - x[1], g2 = x[1] - x[2];
  return 0.5 * (std::exp(-kappa * (2 * g1 + g2)) + std::exp(-kappa * g2));
}

// E cos(2 I1 - I2) = E cos(C1 - C2).
inline double cauchy_skew_closed_form(const std::vector<double>& x, double kappa = kKappa) {
  if (x.size() != 3) throw InputError("closed form needs three points");
  return std::exp(-kappa * (x[0] - x[2]));
}

}  // namespace bcastle
