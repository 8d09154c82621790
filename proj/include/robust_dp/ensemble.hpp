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

// Index-ordered maps over independent runs (seeds, systems). Results land
// in slot i regardless of which worker computed them, so the parallel and
// serial versions return identical vectors.

#include <cstddef>
#include <exception>
#include <optional>
#include <type_traits>
#include <vector>

namespace robust_dp {

/// The OpenMP default thread count, capped by ROBUST_DP_THREADS when that is
/// a positive integer. Never below 1.
int worker_count();

/// Parses a ROBUST_DP_THREADS value; nullopt for anything but a positive integer.
std::optional<int> parse_thread_cap(const char* text);

template <class F>
using MapResult = std::invoke_result_t<F&, std::size_t>;

/// Reference implementation: f(0), f(1), ... in order.
template <class F>
std::vector<MapResult<F>> serial_map(std::size_t count, F&& f) {
  std::vector<MapResult<F>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(f(i));
  return out;
}

/// f(i) for i < count on up to `workers` OpenMP threads (0 means
/// worker_count()). The exception of the lowest failing index is rethrown
/// after every task has finished.
template <class F>
std::vector<MapResult<F>> parallel_map(std::size_t count, F&& f, int workers = 0) {
  using R = MapResult<F>;
  if (workers <= 0) workers = worker_count();
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long long i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      slots[idx].emplace(f(idx));
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace robust_dp
