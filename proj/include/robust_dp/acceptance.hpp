/*
 Copyright 2026 The robust-dp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

// The release acceptance suite, shared by `robust-dp suite` and ctest.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "robust_dp/mat_core.hpp"

namespace robust_dp {

struct SystemRow {
  std::uint64_t seed;
  Index n;
  Index m;
  double p_norm;
  double kleinman_residual;
  bool closed_loop_hurwitz;
  double vi_error;  // relative Frobenius error of vi_run against the oracle
  std::size_t restarts;
  std::size_t iterations;
  std::string terminated;
};

/// Oracle (and optionally vi_run from P0 = 0) on systems base_seed + i.
/// Parallel over systems; rows are index-ordered.
std::vector<SystemRow> random_system_rows(std::uint64_t base_seed, std::size_t count, bool run_vi,
                                          int workers = 0);

struct CriterionResult {
  int id;
  std::string name;
  bool passed;
  std::string detail;
  double seconds;
  double budget_seconds;  // 0 means no runtime bound
};

struct AcceptanceOptions {
  std::uint64_t seed = 0;
  std::size_t systems = 100;
  /// Criteria to run; empty runs 1 to 10.
  std::vector<int> only{};
  int workers = 0;
};

constexpr int kCriterionCount = 10;

std::string_view criterion_name(int id);

CriterionResult run_criterion(int id, const AcceptanceOptions& opts);

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

/// "PASS [3] name: detail (1.2 s)".
std::string format_result(const CriterionResult& r);

}  // namespace robust_dp
