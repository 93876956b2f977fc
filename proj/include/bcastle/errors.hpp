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

#include <stdexcept>
#include <string>

namespace bcastle {

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Structural mismatch between two objects that were expected to line up.
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A coalescence or path did not resolve inside the simulated window.
// `bound` carries the floor (or horizon) that was reached.
struct TruncationError : std::runtime_error {
  double bound;
  TruncationError(const std::string& what, double b) : std::runtime_error(what), bound(b) {}
};

}  // namespace bcastle
