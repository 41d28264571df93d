/* Copyright 2026 The Matrix Attention Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef MATTN_VERIFY_HPP_
#define MATTN_VERIFY_HPP_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace mattn {

struct CheckResult {
  std::string name;
  double max_dev = 0.0;
  bool pass = false;
};

struct VerifyOptions {
  std::uint64_t seed = 0;     // offsets every instance seed
  bool inject_fault = false;  // corrupts one oracle input; the suite must fail
};

// Suites: "oracle", "gradient", "collapse", "diffusion", "cost", "gate".
const std::vector<std::string>& verify_suites();
std::vector<CheckResult> run_suite(const std::string& suite, const VerifyOptions& opts);
std::vector<CheckResult> run_all_checks(const VerifyOptions& opts);

// One "name,max_dev,PASS|FAIL" line per check; max_dev printed with %.17g.
void write_report(std::ostream& os, const std::vector<CheckResult>& results);
bool all_pass(const std::vector<CheckResult>& results);

}  // namespace mattn

#endif  // MATTN_VERIFY_HPP_
