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
// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Usage: acceptance [--only 3,7] [--seed N] [--workers N] [--jsonl FILE]

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "bcastle/acceptance.hpp"

int main(int argc, char** argv) {
  using namespace bcastle::acceptance;
  Options opt;
  std::set<int> only;
  std::string jsonl;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << a << "\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--only") {
      std::stringstream ss(next());
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else if (a == "--seed") {
      opt.seed = std::stoull(next());
    } else if (a == "--workers") {
      opt.workers = static_cast<unsigned>(std::stoul(next()));
    } else if (a == "--jsonl") {
      jsonl = next();
    } else {
      std::cerr << "unknown argument " << a << "\n";
      return 2;
    }
  }
  std::ofstream js;
  if (!jsonl.empty()) js.open(jsonl);
  int failed = 0, ran = 0;
  for (const auto& c : criteria()) {
    if (!only.empty() && !only.count(c.id)) continue;
    auto r = run_one(c, opt);
    std::cout << format_line(r) << std::endl;
    if (js) {
      auto j = r.report.to_json();
      j["criterion"] = c.id;
      j["seconds"] = r.seconds;
      if (!r.error.empty()) j["error"] = r.error;
      js << j.dump() << "\n";
    }
    failed += !r.report.pass;
    ++ran;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed ? 1 : 0;
}
