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

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "robust_dp/riccati.hpp"

namespace robust_dp {

using StepSchedule = std::function<double(std::size_t k)>;
using BoundarySchedule = std::function<double(std::size_t q)>;

/// h_k = h0 / (1 + k)^alpha.
StepSchedule power_step_schedule(double h0, double alpha);

/// B_q = b0 * 2^q.
BoundarySchedule geometric_boundary(double b0);

struct ViConfig {
  SymMatrix P0;
  StepSchedule step = power_step_schedule(0.1, 0.6);
  /// Empty means geometric_boundary(10 * (1 + |P0|)).
  BoundarySchedule boundary{};
  double eps_bar = 1e-6;
  std::size_t max_iters = 1'000'000;
  /// Not part of the textbook listing: more restarts than this ends the
  /// run as `diverged`.
  std::size_t max_restarts = 64;
  /// Keep every `trace_stride`-th iterate in ViRun::trace; 0 keeps none.
  std::size_t trace_stride = 1;
};

enum class Termination { converged, max_iters, diverged };

std::string_view to_string(Termination t);

struct TraceEntry {
  std::size_t k;
  std::size_t q;
  double h;
  SymMatrix P;
  /// |P_{k+1/2} - P_k - h_k (Delta_k + W_k)| / h_k, the termination statistic.
  double residual;
};

struct ViRun {
  std::vector<TraceEntry> trace;
  std::size_t restarts = 0;
  Termination terminated = Termination::max_iters;
  SymMatrix final;
  std::size_t iterations = 0;
};

/// One proposal of the loop body: the half step and its termination statistic.
struct HalfStep {
  SymMatrix P_half;
  double residual;
};

/// The shared boundary/restart/termination skeleton of every value-iteration
/// variant. `propose(k, P_k, h_k)` returns the half step.
template <class Propose>
ViRun run_value_iteration(const ViConfig& cfg, Propose&& propose);

/// P_k + h (Riccati(P_k) + Delta + W).
SymMatrix vi_step(const SymMatrix& p, const LtiSystem& sys, const CostWeights& cost, double h,
                  const std::optional<SymMatrix>& delta = std::nullopt,
                  const std::optional<SymMatrix>& noise = std::nullopt);

/// Model-based value iteration with the boundary/restart rule.
ViRun vi_run(const LtiSystem& sys, const CostWeights& cost, const ViConfig& cfg);

using Rng = std::mt19937_64;

struct DisturbanceHook {
  /// Deterministic perturbation Delta_k(P_k).
  std::function<SymMatrix(std::size_t k, const SymMatrix& p)> delta{};
  /// Stochastic term W_k, drawn from the run's own stream.
  std::function<SymMatrix(std::size_t k, const SymMatrix& p, Rng& rng)> noise{};
};

/// Value iteration with Delta_k + W_k injected into the update and removed
/// again in the termination test. Requires Q > 0.
ViRun robust_vi_run(const LtiSystem& sys, const CostWeights& cost, const ViConfig& cfg,
                    const DisturbanceHook& hooks, std::uint64_t seed = 0);

struct DynamicUncertainty {
  Matrix M0;
  std::function<Matrix(const Matrix& m, const SymMatrix& p)> f;
  std::function<SymMatrix(const SymMatrix& p, const Matrix& m)> delta_out;
  double projection_radius;
  Matrix M_star;
};

struct CoupledViRun {
  ViRun run;
  /// M_k at the same indices as run.trace.
  std::vector<Matrix> M_trace;
  Matrix M_final;
};

/// Projects onto the Frobenius ball of `radius` around `center` by radial scaling.
Matrix project_to_ball(const Matrix& m, const Matrix& center, double radius);

/// Robust VI interconnected with M_{k+1} = Pi(M_k + h_k f(M_k, P_k)) and
/// Delta_k = delta_out(P_k, M_k).
CoupledViRun coupled_vi_run(const LtiSystem& sys, const CostWeights& cost, const ViConfig& cfg,
                            const DynamicUncertainty& unc);

// ---------------------------------------------------------------------------

template <class Propose>
ViRun run_value_iteration(const ViConfig& cfg, Propose&& propose) {
  const BoundarySchedule boundary =
      cfg.boundary ? cfg.boundary : geometric_boundary(10.0 * (1.0 + cfg.P0.norm()));
  ViRun out{.trace = {}, .restarts = 0, .terminated = Termination::max_iters, .final = cfg.P0,
            .iterations = 0};
  SymMatrix p = cfg.P0;
  std::size_t q = 0;
  std::size_t k = 0;
  for (; k < cfg.max_iters; ++k) {
    const double h = cfg.step(k);
    if (!(h > 0.0)) throw Error("value iteration: step size must be positive");
    HalfStep hs = propose(k, p, h);
    if (cfg.trace_stride != 0 && k % cfg.trace_stride == 0) {
      out.trace.push_back(TraceEntry{k, q, h, p, hs.residual});
    }
    const bool pd = is_pd(hs.P_half);
    if (pd && hs.residual < cfg.eps_bar) {
      out.terminated = Termination::converged;
      break;
    }
    if (!pd || hs.P_half.norm() > boundary(q)) {
      p = cfg.P0;
      ++q;
      if (q > cfg.max_restarts) {
        out.terminated = Termination::diverged;
        ++k;
        break;
      }
    } else {
      p = std::move(hs.P_half);
    }
  }
  out.iterations = k;
  out.restarts = q;
  out.final = std::move(p);
  return out;
}

}  // namespace robust_dp
