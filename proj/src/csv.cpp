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

#include "robust_dp/csv.hpp"

#include <array>
#include <charconv>

namespace robust_dp {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw Error("CsvWriter: cannot open " + path.string());
  row(header);
}

void CsvWriter::row(std::span<const double> values) {
  if (values.size() != columns_) throw DimensionError("CsvWriter: wrong number of columns");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ',';
    out_ << format_double(values[i]);
  }
  out_ << '\n';
  if (!out_) throw Error("CsvWriter: write failed");
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw DimensionError("CsvWriter: wrong number of columns");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  if (!out_) throw Error("CsvWriter: write failed");
}

std::vector<std::string> vecs_header(Index n, const std::string& prefix) {
  std::vector<std::string> out;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      out.push_back(prefix + "_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    }
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const ViRun& run) {
  const Index n = run.final.dim();
  std::vector<std::string> header{"k", "q", "h"};
  for (auto& name : vecs_header(n)) header.push_back(std::move(name));
  header.emplace_back("residual_norm");
  CsvWriter csv(path, header);
  std::vector<double> values(header.size());
  for (const auto& e : run.trace) {
    values[0] = static_cast<double>(e.k);
    values[1] = static_cast<double>(e.q);
    values[2] = e.h;
    const Vector v = vecs(e.P);
    for (Index i = 0; i < v.size(); ++i) values[static_cast<std::size_t>(3 + i)] = v(i);
    values.back() = e.residual;
    csv.row(values);
  }
}

void write_trajectory_csv(const std::filesystem::path& path,
                          std::span<const TrajectorySample> samples) {
  if (samples.empty()) throw Error("write_trajectory_csv: no samples");
  const Index n = samples.front().x.size();
  const Index m = samples.front().u.size();
  std::vector<std::string> header{"t"};
  for (Index i = 0; i < n; ++i) header.push_back("x" + std::to_string(i + 1));
  for (Index i = 0; i < m; ++i) header.push_back("u" + std::to_string(i + 1));
  CsvWriter csv(path, header);
  std::vector<double> values(header.size());
  for (const auto& s : samples) {
    if (s.x.size() != n || s.u.size() != m) throw DimensionError("write_trajectory_csv: ragged samples");
    values[0] = s.t;
    for (Index i = 0; i < n; ++i) values[static_cast<std::size_t>(1 + i)] = s.x(i);
    for (Index i = 0; i < m; ++i) values[static_cast<std::size_t>(1 + n + i)] = s.u(i);
    csv.row(values);
  }
}

std::vector<TrajectorySample> read_trajectory_csv(const std::filesystem::path& path, Index n,
                                                  Index m) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("read_trajectory_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error("read_trajectory_csv: missing header");
  std::vector<TrajectorySample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = std::min(line.find(',', start), line.size());
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(line.data() + start, line.data() + comma, v);
      if (ec != std::errc() || ptr != line.data() + comma) {
        throw Error("read_trajectory_csv: bad number on line " + std::to_string(line_no));
      }
      cells.push_back(v);
      start = comma + 1;
    }
    if (cells.size() != static_cast<std::size_t>(1 + n + m)) {
      throw Error("read_trajectory_csv: expected " + std::to_string(1 + n + m) + " columns on line " +
                  std::to_string(line_no));
    }
    TrajectorySample s{cells[0], Vector(n), Vector(m)};
    for (Index i = 0; i < n; ++i) s.x(i) = cells[static_cast<std::size_t>(1 + i)];
    for (Index i = 0; i < m; ++i) s.u(i) = cells[static_cast<std::size_t>(1 + n + i)];
    out.push_back(std::move(s));
  }
  return out;
}

void write_matrix_trace_csv(const std::filesystem::path& path, const std::vector<Matrix>& trace,
                            std::size_t stride) {
  if (trace.empty()) throw Error("write_matrix_trace_csv: empty trace");
  const Index rows = trace.front().rows();
  const Index cols = trace.front().cols();
  std::vector<std::string> header{"k"};
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) {
      header.push_back("M_" + std::to_string(r + 1) + "_" + std::to_string(c + 1));
    }
  }
  CsvWriter csv(path, header);
  std::vector<double> values(header.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    values[0] = static_cast<double>(i * stride);
    const Matrix& mat = trace[i];
    for (Index j = 0; j < mat.size(); ++j) values[static_cast<std::size_t>(1 + j)] = mat.data()[j];
    csv.row(values);
  }
}

}  // namespace robust_dp
