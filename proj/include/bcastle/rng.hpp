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

// Counter-based random streams and a deterministic worker pool.
//
// A stream is keyed by (seed, task id, ...). Output i of a stream is
// mix(key + i * golden), i.e. SplitMix64 used as a counter-based generator,
// so any replica can be regenerated in isolation and results never depend
// on how replicas are distributed over workers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <thread>
#include <vector>

namespace bcastle {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds a list of 64-bit words into one key.
inline std::uint64_t make_key(std::initializer_list<std::uint64_t> words) {
  std::uint64_t k = 0x243f6a8885a308d3ULL;
  for (auto w : words) k = mix64(k ^ mix64(w + kGolden));
  return k;
}

class Stream {
 public:
  using result_type = std::uint64_t;

  Stream() = default;
  explicit Stream(std::uint64_t key) : key_(key) {}
  Stream(std::uint64_t seed, std::uint64_t task) : key_(make_key({seed, task})) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (++ctr_) * kGolden); }

  // Uniform on (0,1), never 0 or 1.
  double uniform() { return ((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

  double normal() {
    // Box-Muller without caching keeps the stream position a pure
    // function of the number of draws.
    double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double exponential() { return -std::log(uniform()); }

  std::uint64_t poisson(double mean) {
    if (mean <= 0) return 0;
    std::poisson_distribution<std::uint64_t> d(mean);
    return d(*this);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return ctr_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t ctr_ = 0;
};

// Runs f(i) for i in [0,n) on `workers` threads with a static block split.
// Each index must write only to its own output slot.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &f] {
      for (std::size_t i = lo; i < hi; ++i) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Replica map: out[i] = f(Stream(seed, i), i).
template <class T, class F>
std::vector<T> replicate(std::size_t n, std::uint64_t seed, unsigned workers, F&& f) {
  std::vector<T> out(n);
  parallel_for(n, workers, [&](std::size_t i) {
    Stream s(seed, i);
    out[i] = f(s, i);
  });
  return out;
}

}  // namespace bcastle
