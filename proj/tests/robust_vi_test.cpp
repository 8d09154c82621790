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

#include <gtest/gtest.h>

#include <cmath>

#include "robust_dp/robust_vi.hpp"
#include "robust_dp/systems.hpp"
#include "test_support.hpp"

namespace robust_dp {
namespace {

LtiSystem scalar(double a, double b) {
  return LtiSystem(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b));
}

CostWeights unit_cost(Index n, Index m) {
  return CostWeights(SymMatrix::identity(n), SymMatrix::identity(m));
}

SymMatrix s1(double v) { return SymMatrix::identity(1) * v; }

ViConfig config(const SymMatrix& p0) {
  ViConfig cfg{.P0 = p0};
  return cfg;
}

void expect_same_trace(const ViRun& a, const ViRun& b) {
  ASSERT_EQ(a.trace.size(), b.trace.size());
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.restarts, b.restarts);
  EXPECT_EQ(a.terminated, b.terminated);
  EXPECT_EQ(a.final, b.final);
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].k, b.trace[i].k);
    EXPECT_EQ(a.trace[i].q, b.trace[i].q);
    EXPECT_EQ(a.trace[i].h, b.trace[i].h);
    EXPECT_EQ(a.trace[i].P, b.trace[i].P);
    EXPECT_EQ(a.trace[i].residual, b.trace[i].residual);
  }
}

TEST(ScheduleTest, PowerAndGeometric) {
  const StepSchedule h = power_step_schedule(0.1, 0.6);
  EXPECT_DOUBLE_EQ(h(0), 0.1);
  EXPECT_DOUBLE_EQ(h(3), 0.1 / std::pow(4.0, 0.6));
  const BoundarySchedule b = geometric_boundary(5.0);
  EXPECT_DOUBLE_EQ(b(0), 5.0);
  EXPECT_DOUBLE_EQ(b(3), 40.0);
}

TEST(ViStepTest, Examples) {
  const LtiSystem sys = scalar(0, 1);
  const CostWeights cost = unit_cost(1, 1);
  EXPECT_DOUBLE_EQ(vi_step(s1(0), sys, cost, 0.5)(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(vi_step(s1(0), sys, cost, 0.5, s1(0.2))(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(vi_step(s1(0), sys, cost, 0.5, s1(0.2), s1(-0.4))(0, 0), 0.4);
}

TEST(ViStepTest, FixedPointAtOracle) {
  const LtiSystem sys = kinematics_plant();
  const AreSolution s = oracle_are(sys, unit_cost(3, 1));
  EXPECT_LE((vi_step(s.P_star, sys, unit_cost(3, 1), 0.1) - s.P_star).norm(), 1e-12);
}

TEST(ViRunTest, StartsAtOracle) {
  const LtiSystem sys = kinematics_plant();
  const AreSolution s = oracle_are(sys, unit_cost(3, 1));
  const ViRun run = vi_run(sys, unit_cost(3, 1), config(s.P_star));
  EXPECT_EQ(run.terminated, Termination::converged);
  EXPECT_EQ(run.iterations, 0u);
  EXPECT_EQ(run.final, s.P_star);
}

TEST(ViRunTest, ScalarTarget) {
  const ViRun run = vi_run(scalar(-1, 1), unit_cost(1, 1), config(s1(0)));
  EXPECT_EQ(run.terminated, Termination::converged);
  EXPECT_NEAR(run.final(0, 0), std::sqrt(2.0) - 1.0, 1e-5);
}

TEST(ViRunTest, KinematicsFromZero) {
  const LtiSystem sys = kinematics_plant();
  const AreSolution s = oracle_are(sys, unit_cost(3, 1));
  ViConfig cfg = config(SymMatrix::zero(3));
  cfg.step = power_step_schedule(0.05, 0.3);
  cfg.trace_stride = 100;
  const ViRun run = vi_run(sys, unit_cost(3, 1), cfg);
  EXPECT_EQ(run.terminated, Termination::converged);
  EXPECT_EQ(run.restarts, 0u);
  EXPECT_LE((run.final - s.P_star).norm(), 1e-4);
}

TEST(ViRunTest, ConvergedResidualIsSmall) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RandomSystem rs = random_stable_system(seed);
    ViConfig cfg = config(SymMatrix::zero(rs.sys.n()));
    cfg.trace_stride = 0;
    const ViRun run = vi_run(rs.sys, rs.cost, cfg);
    ASSERT_EQ(run.terminated, Termination::converged);
    EXPECT_LE(riccati_residual(run.final, rs.sys, rs.cost).norm(), 2.0 * cfg.eps_bar);
  }
}

TEST(ViRunTest, RestartsOnLargeSteps) {
  // The default first steps leave the PD cone on the fast mode; the run
  // restarts from P0 and converges once the steps have shrunk.
  const LtiSystem sys = kinematics_plant();
  ViConfig cfg = config(SymMatrix::zero(3));
  cfg.trace_stride = 0;
  const ViRun run = vi_run(sys, unit_cost(3, 1), cfg);
  EXPECT_GT(run.restarts, 0u);
  EXPECT_EQ(run.terminated, Termination::converged);
  EXPECT_LE((run.final - oracle_are(sys, unit_cost(3, 1)).P_star).norm(), 1e-4);
}

TEST(ViRunTest, MaxItersAndDivergence) {
  ViConfig cfg = config(s1(0));
  cfg.max_iters = 5;
  const ViRun short_run = vi_run(scalar(-1, 1), unit_cost(1, 1), cfg);
  EXPECT_EQ(short_run.terminated, Termination::max_iters);
  EXPECT_EQ(short_run.iterations, 5u);

  ViConfig wild = config(s1(0));
  wild.step = [](std::size_t) { return 50.0; };
  wild.max_restarts = 3;
  const ViRun diverged = vi_run(scalar(-1, 1), unit_cost(1, 1), wild);
  EXPECT_EQ(diverged.terminated, Termination::diverged);
  EXPECT_EQ(diverged.restarts, 4u);
}

TEST(ViRunTest, RejectsBadInputs) {
  EXPECT_THROW(vi_run(scalar(-1, 1), unit_cost(1, 1), config(SymMatrix::zero(2))), DimensionError);
  const CostWeights semidefinite(SymMatrix::zero(1), SymMatrix::identity(1));
  EXPECT_THROW(vi_run(scalar(-1, 1), semidefinite, config(s1(0))), Error);
  EXPECT_NO_THROW(vi_run(scalar(-1, 1), semidefinite, config(s1(1))));
  ViConfig bad = config(s1(0));
  bad.step = [](std::size_t) { return 0.0; };
  EXPECT_THROW(vi_run(scalar(-1, 1), unit_cost(1, 1), bad), Error);
}

TEST(ViRunTest, TraceIsSymmetricAndDeterministic) {
  Rng rng(21);
  const LtiSystem sys(testing::random_hurwitz(4, rng), testing::random_matrix(4, 2, rng));
  ViConfig cfg = config(SymMatrix::zero(4));
  cfg.trace_stride = 7;
  const ViRun a = vi_run(sys, unit_cost(4, 2), cfg);
  const ViRun b = vi_run(sys, unit_cost(4, 2), cfg);
  expect_same_trace(a, b);
  for (const auto& e : a.trace) EXPECT_EQ(e.P.dense(), e.P.dense().transpose());
}

TEST(ViRunTest, ErrorContractsNearOracle) {
  const LtiSystem sys = kinematics_plant();
  const SymMatrix p_star = oracle_are(sys, unit_cost(3, 1)).P_star;
  ViConfig cfg = config(p_star + SymMatrix::identity(3) * 0.05);
  cfg.eps_bar = 1e-9;
  const ViRun run = vi_run(sys, unit_cost(3, 1), cfg);
  double prev = INFINITY;
  for (const auto& e : run.trace) {
    const double err = (e.P - p_star).norm();
    EXPECT_LE(err, prev + 1e-15);
    prev = err;
  }
}

TEST(RobustViTest, NullHooksReduceToViRun) {
  const LtiSystem sys = kinematics_plant();
  ViConfig cfg = config(SymMatrix::zero(3));
  cfg.trace_stride = 13;
  expect_same_trace(robust_vi_run(sys, unit_cost(3, 1), cfg, {}), vi_run(sys, unit_cost(3, 1), cfg));
}

TEST(RobustViTest, ZeroHooksReduceToViRun) {
  const LtiSystem sys = kinematics_plant();
  ViConfig cfg = config(SymMatrix::zero(3));
  cfg.trace_stride = 13;
  DisturbanceHook hooks;
  hooks.delta = [](std::size_t, const SymMatrix& p) { return SymMatrix::zero(p.dim()); };
  expect_same_trace(robust_vi_run(sys, unit_cost(3, 1), cfg, hooks), vi_run(sys, unit_cost(3, 1), cfg));
}

TEST(RobustViTest, VanishingDisturbance) {
  const LtiSystem sys = kinematics_plant();
  const SymMatrix p_star = oracle_are(sys, unit_cost(3, 1)).P_star;
  ViConfig cfg = config(SymMatrix::zero(3));
  cfg.trace_stride = 0;
  DisturbanceHook hooks;
  hooks.delta = [](std::size_t k, const SymMatrix&) {
    return SymMatrix::identity(3) * (1.0 / static_cast<double>(k + 1));
  };
  const ViRun run = robust_vi_run(sys, unit_cost(3, 1), cfg, hooks);
  EXPECT_LE((run.final - p_star).norm(), 1e-3);
}

TEST(RobustViTest, MartingaleNoiseOverSeeds) {
  const LtiSystem sys = scalar(-1, 1);
  ViConfig cfg = config(s1(0));
  cfg.step = power_step_schedule(0.5, 0.9);
  cfg.max_iters = 200000;
  cfg.trace_stride = 0;
  DisturbanceHook hooks;
  hooks.noise = [](std::size_t, const SymMatrix&, Rng& rng) {
    return s1(std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ViRun run = robust_vi_run(sys, unit_cost(1, 1), cfg, hooks, seed);
    EXPECT_NEAR(run.final(0, 0), std::sqrt(2.0) - 1.0, 1e-2) << "seed " << seed;
  }
}

TEST(RobustViTest, SeededRunsAreBitIdentical) {
  const LtiSystem sys = kinematics_plant();
  ViConfig cfg = config(SymMatrix::zero(3));
  cfg.step = power_step_schedule(0.1, 0.9);
  cfg.max_iters = 5000;
  cfg.trace_stride = 10;
  DisturbanceHook hooks;
  hooks.noise = [](std::size_t, const SymMatrix&, Rng& rng) {
    return SymMatrix::identity(3) * std::normal_distribution<double>(0.0, 0.1)(rng);
  };
  expect_same_trace(robust_vi_run(sys, unit_cost(3, 1), cfg, hooks, 9),
                    robust_vi_run(sys, unit_cost(3, 1), cfg, hooks, 9));
  const ViRun other = robust_vi_run(sys, unit_cost(3, 1), cfg, hooks, 10);
  EXPECT_NE(other.final, robust_vi_run(sys, unit_cost(3, 1), cfg, hooks, 9).final);
}

TEST(RobustViTest, BoundedUnderStateDependentDisturbance) {
  const LtiSystem sys = kinematics_plant();
  ViConfig cfg = config(SymMatrix::zero(3));
  cfg.step = power_step_schedule(0.05, 0.3);
  cfg.max_iters = 50000;
  cfg.trace_stride = 1;
  DisturbanceHook hooks;
  hooks.delta = [](std::size_t k, const SymMatrix& p) {
    return SymMatrix::identity(3) * (0.01 * std::sin(0.1 * static_cast<double>(k)) * (1.0 + p.norm()));
  };
  const ViRun run = robust_vi_run(sys, unit_cost(3, 1), cfg, hooks);
  double sup = 0.0;
  for (const auto& e : run.trace) sup = std::max(sup, e.P.norm());
  EXPECT_EQ(run.restarts, 0u);
  EXPECT_LT(sup, 20.0);
}

TEST(RobustViTest, TerminationStatisticRemovesInjectedTerms) {
  // With a constant disturbance the statistic is the unperturbed Riccati
  // rate, so the run cannot stop at the shifted equilibrium.
  const LtiSystem sys = scalar(-1, 1);
  ViConfig cfg = config(s1(0));
  cfg.max_iters = 20000;
  DisturbanceHook hooks;
  hooks.delta = [](std::size_t, const SymMatrix&) { return s1(1.0); };
  const ViRun run = robust_vi_run(sys, unit_cost(1, 1), cfg, hooks);
  EXPECT_EQ(run.terminated, Termination::max_iters);
  for (const auto& e : run.trace) {
    const double rate = riccati_residual(e.P, sys, unit_cost(1, 1)).norm();
    EXPECT_NEAR(e.residual, rate, 1e-9 * (1.0 + rate));
  }
  EXPECT_NEAR(run.final(0, 0), std::sqrt(3.0) - 1.0, 1e-3);
}

TEST(ProjectionTest, RadialScaling) {
  const Matrix center = Matrix::Constant(1, 2, 1.0);
  Matrix m(1, 2);
  m << 4.0, 5.0;
  const Matrix p = project_to_ball(m, center, 1.0);
  EXPECT_NEAR((p - center).norm(), 1.0, 1e-15);
  EXPECT_NEAR((p - center)(0, 0) / (p - center)(0, 1), 3.0 / 4.0, 1e-15);
  EXPECT_EQ(project_to_ball(center, center, 1.0), center);
}

DynamicUncertainty scalar_uncertainty(double gain, double m0) {
  const double p_star = std::sqrt(2.0) - 1.0;
  DynamicUncertainty unc;
  unc.M0 = Matrix::Constant(1, 1, m0);
  unc.M_star = Matrix::Zero(1, 1);
  unc.projection_radius = 1.0;
  unc.f = [p_star](const Matrix& m, const SymMatrix& p) {
    return Matrix(-m + 0.1 * (p.dense() - Matrix::Constant(1, 1, p_star)));
  };
  unc.delta_out = [gain](const SymMatrix&, const Matrix& m) { return SymMatrix(gain * m); };
  return unc;
}

TEST(CoupledViTest, ZeroUncertaintyReducesToViRun) {
  const LtiSystem sys = kinematics_plant();
  ViConfig cfg = config(SymMatrix::zero(3));
  cfg.trace_stride = 11;
  DynamicUncertainty unc;
  unc.M0 = Matrix::Zero(2, 2);
  unc.M_star = Matrix::Zero(2, 2);
  unc.projection_radius = 1.0;
  const CoupledViRun c = coupled_vi_run(sys, unit_cost(3, 1), cfg, unc);
  expect_same_trace(c.run, vi_run(sys, unit_cost(3, 1), cfg));
  EXPECT_EQ(c.M_trace.size(), c.run.trace.size());
}

TEST(CoupledViTest, SmallGainPairConverges) {
  const double p_star = std::sqrt(2.0) - 1.0;
  ViConfig cfg = config(s1(p_star + 0.2));
  cfg.eps_bar = 1e-8;
  const CoupledViRun c = coupled_vi_run(scalar(-1, 1), unit_cost(1, 1), cfg, scalar_uncertainty(0.05, 0.5));
  EXPECT_EQ(c.run.terminated, Termination::converged);
  EXPECT_NEAR(c.run.final(0, 0), p_star, 1e-3);
  EXPECT_NEAR(c.M_final(0, 0), 0.0, 1e-3);
  for (const auto& m : c.M_trace) EXPECT_LE(m.norm(), 1.0 + 1e-12);
}

TEST(CoupledViTest, LargeGainViolatesSmallGain) {
  const double p_star = std::sqrt(2.0) - 1.0;
  ViConfig cfg = config(s1(p_star));
  cfg.max_iters = 200000;
  cfg.trace_stride = 0;
  const CoupledViRun c = coupled_vi_run(scalar(-1, 1), unit_cost(1, 1), cfg, scalar_uncertainty(10.0, -0.5));
  EXPECT_TRUE(c.run.terminated == Termination::diverged || c.run.restarts > 0);
}

}  // namespace
}  // namespace robust_dp
