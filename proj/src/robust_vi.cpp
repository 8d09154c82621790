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

#include "robust_dp/robust_vi.hpp"

#include <cmath>

namespace robust_dp {

StepSchedule power_step_schedule(double h0, double alpha) {
  if (!(h0 > 0.0) || alpha < 0.0) throw Error("power_step_schedule: need h0 > 0, alpha >= 0");
  return [h0, alpha](std::size_t k) {
    return h0 / std::pow(1.0 + static_cast<double>(k), alpha);
  };
}

BoundarySchedule geometric_boundary(double b0) {
  if (!(b0 > 0.0)) throw Error("geometric_boundary: b0 must be positive");
  return [b0](std::size_t q) { return std::ldexp(b0, static_cast<int>(q)); };
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::max_iters:
      return "max_iters";
    case Termination::diverged:
      return "diverged";
  }
  return "unknown";
}

namespace {

void check_q_positive(const CostWeights& cost) {
  if (!is_pd(cost.Q())) throw Error("robust value iteration requires Q > 0");
}

// The disturbance-free proposal; shared so that the reductions are bitwise.
HalfStep plain_half_step(const RiccatiOperator& op, const SymMatrix& p, double h) {
  SymMatrix half = p + h * op(p);
  const double res = (half - p).norm() / h;
  return HalfStep{std::move(half), res};
}

HalfStep disturbed_half_step(const RiccatiOperator& op, const SymMatrix& p, double h,
                             const SymMatrix& d) {
  SymMatrix half = p + h * (op(p) + d);
  const double res = (half - p - h * d).norm() / h;
  return HalfStep{std::move(half), res};
}

}  // namespace

SymMatrix vi_step(const SymMatrix& p, const LtiSystem& sys, const CostWeights& cost, double h,
                  const std::optional<SymMatrix>& delta, const std::optional<SymMatrix>& noise) {
  if (!(h > 0.0)) throw Error("vi_step: h must be positive");
  SymMatrix rate = riccati_residual(p, sys, cost);
  if (delta) rate += *delta;
  if (noise) rate += *noise;
  return p + h * rate;
}

ViRun vi_run(const LtiSystem& sys, const CostWeights& cost, const ViConfig& cfg) {
  if (cfg.P0.dim() != sys.n()) throw DimensionError("vi_run: P0 has the wrong size");
  if (!is_pd(cost.Q()) && !is_pd(cfg.P0)) throw Error("vi_run: need Q > 0 or P0 > 0");
  const RiccatiOperator op(sys, cost);
  return run_value_iteration(
      cfg, [&](std::size_t, const SymMatrix& p, double h) { return plain_half_step(op, p, h); });
}

ViRun robust_vi_run(const LtiSystem& sys, const CostWeights& cost, const ViConfig& cfg,
                    const DisturbanceHook& hooks, std::uint64_t seed) {
  if (cfg.P0.dim() != sys.n()) throw DimensionError("robust_vi_run: P0 has the wrong size");
  check_q_positive(cost);
  const RiccatiOperator op(sys, cost);
  if (!hooks.delta && !hooks.noise) {
    return run_value_iteration(
        cfg, [&](std::size_t, const SymMatrix& p, double h) { return plain_half_step(op, p, h); });
  }
  Rng rng(seed);
  return run_value_iteration(cfg, [&](std::size_t k, const SymMatrix& p, double h) {
    SymMatrix d = SymMatrix::zero(p.dim());
    if (hooks.delta) d += hooks.delta(k, p);
    if (hooks.noise) d += hooks.noise(k, p, rng);
    return disturbed_half_step(op, p, h, d);
  });
}

Matrix project_to_ball(const Matrix& m, const Matrix& center, double radius) {
  const Matrix diff = m - center;
  const double r = diff.norm();
  if (r <= radius) return m;
  return center + (radius / r) * diff;
}

CoupledViRun coupled_vi_run(const LtiSystem& sys, const CostWeights& cost, const ViConfig& cfg,
                            const DynamicUncertainty& unc) {
  if (cfg.P0.dim() != sys.n()) throw DimensionError("coupled_vi_run: P0 has the wrong size");
  if (!(unc.projection_radius > 0.0)) throw Error("coupled_vi_run: projection radius must be > 0");
  check_q_positive(cost);
  const RiccatiOperator op(sys, cost);
  Matrix m = project_to_ball(unc.M0, unc.M_star, unc.projection_radius);
  std::vector<Matrix> m_trace;
  ViRun run = run_value_iteration(cfg, [&](std::size_t k, const SymMatrix& p, double h) {
    if (cfg.trace_stride != 0 && k % cfg.trace_stride == 0) m_trace.push_back(m);
    const SymMatrix d = unc.delta_out ? unc.delta_out(p, m) : SymMatrix::zero(p.dim());
    HalfStep hs = disturbed_half_step(op, p, h, d);
    if (unc.f) m = project_to_ball(m + h * unc.f(m, p), unc.M_star, unc.projection_radius);
    return hs;
  });
  return CoupledViRun{std::move(run), std::move(m_trace), std::move(m)};
}

}  // namespace robust_dp
