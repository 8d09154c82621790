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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "robust_dp/ergodic.hpp"
#include "robust_dp/systems.hpp"
#include "test_support.hpp"

namespace robust_dp {
namespace {

SdeSystem scalar_sde(double a, double b, double sigma) {
  SdeSystem sys{LtiSystem(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b)), {}};
  if (sigma != 0.0) sys.sigma_x.push_back(Vector::Constant(1, sigma));
  return sys;
}

ExplorationPolicy scalar_policy(double k0, double sigma_u) {
  ExplorationPolicy pol{Matrix::Constant(1, 1, k0), {}};
  if (sigma_u != 0.0) pol.sigma_u.push_back(Vector::Constant(1, sigma_u));
  return pol;
}

ExplorationPolicy timeseries_policy() {
  Matrix k0(1, 3);
  k0 << 0.0, 1.0, 0.0;
  return ExplorationPolicy{k0, {Vector::Constant(1, 0.5)}};
}

CostWeights timeseries_cost() {
  return CostWeights(SymMatrix::identity(3) * 0.1, SymMatrix::identity(1) * 0.01);
}

double mean_square(const SdePath& path, std::size_t from, std::size_t to) {
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) s += path.x[i].squaredNorm();
  return s / static_cast<double>(to - from);
}

TEST(ScheduleTest, ProportionalAndUniform) {
  EXPECT_EQ(proportional_schedule(5.0, 3), (std::vector<double>{5.0, 10.0, 15.0}));
  EXPECT_EQ(uniform_schedule(5.0, 1.0, 3), (std::vector<double>{5.0, 6.0, 7.0}));
}

TEST(SimulateTest, GridAndInitialInput) {
  const SdePath path = simulate_sde(scalar_sde(-1, 1, 1), scalar_policy(2.0, 1.0), 1.0, 0.01, 1,
                                    Vector::Constant(1, 3.0));
  ASSERT_EQ(path.t.size(), 101u);
  EXPECT_DOUBLE_EQ(path.t.back(), 1.0);
  EXPECT_DOUBLE_EQ(path.u.front()(0), -6.0);
  EXPECT_THROW(simulate_sde(scalar_sde(-1, 1, 1), scalar_policy(0, 0), 1.0, 0.0, 1), Error);
}

TEST(SimulateTest, NoiselessPathFollowsClosedLoopOde) {
  // u = -K0 x exactly, so x(t) = exp((A - B K0) t) x0; the error is first order in dt.
  auto gap = [](double dt) {
    const SdePath path = simulate_sde(scalar_sde(0.5, 1, 0), scalar_policy(2.0, 0), 2.0, dt, 0,
                                      Vector::Constant(1, 1.0));
    double worst = 0.0;
    for (std::size_t i = 0; i < path.t.size(); ++i) {
      worst = std::max(worst, std::abs(path.x[i](0) - std::exp(-1.5 * path.t[i])));
      EXPECT_NEAR(path.u[i](0), -2.0 * path.x[i](0), 1e-12);
    }
    return worst;
  };
  const double coarse = gap(2e-3);
  const double fine = gap(1e-3);
  EXPECT_LT(coarse, 1e-3);
  EXPECT_NEAR(coarse / fine, 2.0, 0.1);
}

TEST(SimulateTest, OrnsteinUhlenbeckStationaryVariance) {
  const SdePath path = simulate_sde(scalar_sde(-1, 0, 1), scalar_policy(0, 0), 5000.0, 1e-2, 17);
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& x : path.x) {
    sum += x(0);
    sq += x(0) * x(0);
  }
  const double n = static_cast<double>(path.x.size());
  const double var = sq / n - (sum / n) * (sum / n);
  EXPECT_NEAR(var, 0.5, 0.05);
}

TEST(SimulateTest, WeakConvergenceOfStepper) {
  // dx = -x dt + dw from x0 = 1 up to T = 1.
  const double mean_exact = std::exp(-1.0);
  const double var_exact = 0.5 * (1.0 - std::exp(-2.0));
  double prev_bias = INFINITY;
  for (double dt : {1e-2, 1e-3}) {
    const std::size_t paths = 2000;
    std::vector<double> finals(paths);
    for (std::size_t i = 0; i < paths; ++i) {
      finals[i] = simulate_sde(scalar_sde(-1, 0, 1), scalar_policy(0, 0), 1.0, dt, 100 + i,
                               Vector::Constant(1, 1.0))
                      .x.back()(0);
    }
    const double mean = std::accumulate(finals.begin(), finals.end(), 0.0) / paths;
    double var = 0.0;
    for (double f : finals) var += (f - mean) * (f - mean);
    var /= static_cast<double>(paths - 1);
    const double se_mean = std::sqrt(var / paths);
    const double se_var = var * std::sqrt(2.0 / static_cast<double>(paths - 1));
    EXPECT_NEAR(mean, mean_exact, 3.0 * se_mean) << dt;
    EXPECT_NEAR(var, var_exact, 3.0 * se_var) << dt;

    // Moments of the Euler-Maruyama recursion itself, free of sampling error.
    const auto steps = static_cast<std::size_t>(std::lround(1.0 / dt));
    double m = 1.0;
    double v = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      m *= 1.0 - dt;
      v = (1.0 - dt) * (1.0 - dt) * v + dt;
    }
    const double bias = std::abs(m - mean_exact) + std::abs(v - var_exact);
    EXPECT_LT(bias, prev_bias);
    prev_bias = bias;
  }
}

TEST(SimulateTest, TimeSeriesPlantNeedsFeedbackForBoundedness) {
  // The open-loop characteristic polynomial is (s^2 + 1)(s + 4): the noise
  // excites an undamped mode. The exploration gain alone damps it.
  const SdeSystem sde = timeseries_sde();
  const std::size_t quarter = 250000;
  const SdePath open = simulate_sde(sde, ExplorationPolicy{Matrix::Zero(1, 3), {}}, 1000.0, 1e-3, 5);
  const SdePath closed =
      simulate_sde(sde, ExplorationPolicy{timeseries_policy().K0, {}}, 1000.0, 1e-3, 5);
  EXPECT_GT(mean_square(open, 3 * quarter, 4 * quarter), 2.0 * mean_square(open, 0, quarter));
  const double early = mean_square(closed, quarter, 2 * quarter);
  const double late = mean_square(closed, 3 * quarter, 4 * quarter);
  EXPECT_LT(late, 2.0 * early);
  EXPECT_GT(late, early / 2.0);
}

TEST(SimulateTest, SeededDeterminism) {
  const SdeSystem sde = timeseries_sde();
  const SdePath a = simulate_sde(sde, timeseries_policy(), 10.0, 1e-3, 9);
  const SdePath b = simulate_sde(sde, timeseries_policy(), 10.0, 1e-3, 9);
  const SdePath c = simulate_sde(sde, timeseries_policy(), 10.0, 1e-3, 10);
  ASSERT_EQ(a.x.size(), b.x.size());
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    ASSERT_EQ(a.x[i], b.x[i]);
    ASSERT_EQ(a.u[i], b.u[i]);
  }
  EXPECT_NE(a.x.back(), c.x.back());
}

TEST(SimulateTest, BlowUpIsReported) {
  EXPECT_THROW(simulate_sde(scalar_sde(800.0, 1, 0), scalar_policy(0, 0), 10.0, 1e-2, 0,
                            Vector::Constant(1, 1.0)),
               BlowUpError);
}

TEST(RegressorTest, ErgodicRegressorLayout) {
  Vector x(2);
  x << 1.0, 2.0;
  const Vector psi = ergodic_regressor(x, Vector::Constant(1, 3.0));
  ASSERT_EQ(psi.size(), 3 + 2 + 1);
  EXPECT_EQ(psi.head(3), bar_vec(x));
  EXPECT_DOUBLE_EQ(psi(3), 6.0);
  EXPECT_DOUBLE_EQ(psi(4), 12.0);
  EXPECT_DOUBLE_EQ(psi(5), 1.0);
}

TEST(EstimateTest, AccumulatorMatchesPathStatistics) {
  const SdePath path = simulate_sde(timeseries_sde(), timeseries_policy(), 3.0, 1e-3, 2);
  ThetaAccumulator acc(3, 1);
  acc.start(path.t[0], path.x[0], path.u[0]);
  for (std::size_t i = 1; i <= 2000; ++i) acc.add(path.t[i], path.x[i], path.u[i]);
  const ThetaStatistics streamed = acc.snapshot();
  const ThetaStatistics batch = theta_statistics(path, 2.0);
  EXPECT_DOUBLE_EQ(streamed.t, batch.t);
  EXPECT_LE(testing::max_abs(streamed.gram - batch.gram), 1e-12);
  EXPECT_LE(testing::max_abs(streamed.cross - batch.cross), 1e-12);
}

TEST(EstimateTest, ZeroPGivesZeroTheta) {
  const SdePath path = simulate_sde(timeseries_sde(), timeseries_policy(), 20.0, 1e-3, 3);
  EXPECT_EQ(estimate_theta(path, SymMatrix::zero(3), 20.0).norm(), 0.0);
}

TEST(EstimateTest, LinearInP) {
  const SdePath path = simulate_sde(timeseries_sde(), timeseries_policy(), 50.0, 1e-3, 4);
  Rng rng(1);
  const SymMatrix p1 = testing::random_sym(3, rng);
  const SymMatrix p2 = testing::random_sym(3, rng);
  const Vector lhs = estimate_theta(path, p1 * 0.7 + p2 * (-1.3), 50.0);
  const Vector rhs = 0.7 * estimate_theta(path, p1, 50.0) - 1.3 * estimate_theta(path, p2, 50.0);
  EXPECT_LE((lhs - rhs).norm(), 1e-10 * (1.0 + rhs.norm()));
}

TEST(EstimateTest, NoiselessStateMatchesModelTerms) {
  // Exploration noise only: theta_hat recovers [vecs(PA + A^T P); ves(B^T P)].
  Matrix a(2, 2);
  a << 0.0, 1.0, -2.0, -3.0;
  Matrix b(2, 1);
  b << 0.0, 1.0;
  const SdeSystem sys{LtiSystem(a, b), {}};
  const ExplorationPolicy pol{Matrix::Zero(1, 2), {Vector::Constant(1, 2.0)}};
  const SdePath path = simulate_sde(sys, pol, 400.0, 1e-3, 11);
  Rng rng(2);
  const SymMatrix p = testing::random_pd(2, rng);
  const Vector est = estimate_theta(path, p, 400.0);
  const Vector truth = compact_theta(a, b, p);
  ASSERT_EQ(est.size(), truth.size() + 1);
  EXPECT_LE((est.head(truth.size()) - truth).norm(), 0.05 * truth.norm());
  EXPECT_LE(std::abs(est(truth.size())), 0.05 * truth.norm());
}

TEST(EstimateTest, ConstantComponentIsItoCorrection) {
  // A single path scatters by tens of percent because the exploration input
  // is a random walk; the seed median is the stable statistic.
  const SdeSystem sde = timeseries_sde();
  const SymMatrix p_star = oracle_are(sde.plant, timeseries_cost()).P_star;
  std::vector<double> last;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SdePath path = simulate_sde(sde, timeseries_policy(), 1000.0, 1e-3, 100 + seed);
    const Vector est = estimate_theta(path, p_star, 1000.0);
    last.push_back(est(est.size() - 1));
  }
  std::sort(last.begin(), last.end());
  const double expected = ergodic_cost(sde, p_star);
  EXPECT_NEAR(0.5 * (last[4] + last[5]), expected, 0.1 * expected);
}

TEST(EstimateTest, MartingaleErrorShrinksWithTime) {
  const SdeSystem sys = scalar_sde(-1, 1, 1);
  const ExplorationPolicy pol = scalar_policy(0, 1);
  const SymMatrix p = SymMatrix::identity(1);
  const Vector truth = compact_theta(sys.plant.A(), sys.plant.B(), p);
  std::vector<double> spread;
  for (double t : {25.0, 100.0, 400.0}) {
    std::vector<double> err;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      const SdePath path = simulate_sde(sys, pol, t, 1e-2, 50 + seed);
      err.push_back((estimate_theta(path, p, t).head(truth.size()) - truth).norm());
    }
    double ms = 0.0;
    for (double e : err) ms += e * e;
    spread.push_back(ms / static_cast<double>(err.size()));
  }
  EXPECT_GT(spread[0], spread[1]);
  EXPECT_GT(spread[1], spread[2]);
}

TEST(GramTest, ZeroPathHasZeroMargin) {
  const SdePath path = simulate_sde(scalar_sde(-1, 1, 0), scalar_policy(1.0, 0), 5.0, 1e-2, 0);
  EXPECT_NEAR(empirical_gram_check(path, 5.0), 0.0, 1e-14);
}

TEST(GramTest, ExplorationMarginIsPositiveAndDoesNotDecay) {
  // u carries an integrated Brownian term, so its second moment and the
  // margin keep growing with t instead of levelling off.
  const SdePath path = simulate_sde(timeseries_sde(), timeseries_policy(), 800.0, 1e-3, 7);
  const double m200 = empirical_gram_check(path, 200.0);
  const double m400 = empirical_gram_check(path, 400.0);
  const double m800 = empirical_gram_check(path, 800.0);
  EXPECT_GT(m200, 0.0);
  EXPECT_GT(m400, 0.9 * m200);
  EXPECT_GT(m800, 0.9 * m400);
}

TEST(ErgodicRunTest, DegenerateExplorationIsRejected) {
  const SdeSystem sys = scalar_sde(-1, 1, 0);
  ErgodicConfig cfg{.dt = 1e-2, .t_schedule = proportional_schedule(5.0, 5),
                    .vi = ViConfig{.P0 = SymMatrix::zero(1)}, .x0 = Vector::Constant(1, 1.0)};
  EXPECT_THROW(ergodic_adp_run(sys, scalar_policy(1.0, 0), CostWeights(SymMatrix::identity(1),
                                                                       SymMatrix::identity(1)),
                               cfg, 0),
               SingularGramError);
}

ErgodicConfig timeseries_config(std::size_t updates) {
  ErgodicConfig cfg{.dt = 1e-3, .t_schedule = uniform_schedule(5.0, 1.0, updates),
                    .vi = ViConfig{.P0 = SymMatrix::zero(3)}};
  cfg.vi.step = power_step_schedule(0.2, 0.5);
  cfg.vi.max_iters = updates;
  cfg.vi.trace_stride = 1;
  return cfg;
}

TEST(ErgodicRunTest, SeededRunsRepeat) {
  const ErgodicConfig cfg = timeseries_config(50);
  const ViRun a = ergodic_adp_run(timeseries_sde(), timeseries_policy(), timeseries_cost(), cfg, 3);
  const ViRun b = ergodic_adp_run(timeseries_sde(), timeseries_policy(), timeseries_cost(), cfg, 3);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].P, b.trace[i].P);
  EXPECT_EQ(a.final, b.final);
}

TEST(ErgodicRunTest, TimeSeriesEnsembleLearnsOptimalValue) {
  const SdeSystem sde = timeseries_sde();
  const SymMatrix p_star = oracle_are(sde.plant, timeseries_cost()).P_star;
  const double optimal = ergodic_cost(sde, p_star);
  const ErgodicConfig cfg = timeseries_config(2000);
  std::vector<double> errs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ViRun run = ergodic_adp_run(sde, timeseries_policy(), timeseries_cost(), cfg, seed);
    errs.push_back((run.final - p_star).norm() / p_star.norm());
    EXPECT_NEAR(ergodic_cost(sde, run.final), optimal, 0.15 * optimal) << "seed " << seed;
  }
  std::sort(errs.begin(), errs.end());
  EXPECT_LE(0.5 * (errs[4] + errs[5]), 0.10);
}

}  // namespace
}  // namespace robust_dp
