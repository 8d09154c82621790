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

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "robust_dp/adp.hpp"

namespace robust_dp {

/// Shortest round-trip decimal form; identical bytes for identical doubles.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(std::span<const double> values);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

/// Column names P_i_j (1-based) in vecs order.
std::vector<std::string> vecs_header(Index n, const std::string& prefix = "P");

/// Rows (k, q, h, vecs(P_k)..., residual).
void write_trace_csv(const std::filesystem::path& path, const ViRun& run);

/// Rows (t, x..., u...).
void write_trajectory_csv(const std::filesystem::path& path,
                          std::span<const TrajectorySample> samples);

/// Reads the format written by write_trajectory_csv. Throws Error on a
/// malformed file or a column count other than 1 + n + m.
std::vector<TrajectorySample> read_trajectory_csv(const std::filesystem::path& path, Index n,
                                                  Index m);

/// Rows (k, M entries column-major).
void write_matrix_trace_csv(const std::filesystem::path& path, const std::vector<Matrix>& trace,
                            std::size_t stride);

}  // namespace robust_dp
