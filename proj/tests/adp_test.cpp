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
#include <vector>

#include "robust_dp/adp.hpp"
#include "robust_dp/systems.hpp"
#include "test_support.hpp"

namespace robust_dp {
namespace {

CostWeights unit_cost(Index n, Index m) {
  return CostWeights(SymMatrix::identity(n), SymMatrix::identity(m));
}

struct Recording {
  std::vector<TrajectorySample> traj;
  std::vector<std::size_t> breaks;
};

// RK4 samples of dx = Ax + Bu under a sum-of-sines input, with a breakpoint
// every `sub` samples.
Recording record(const LtiSystem& sys, const Vector& x0, double amplitude, double dt,
                 std::size_t sub, std::size_t intervals, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> freq(0.3, 5.0);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  const Index m = sys.m();
  std::vector<double> w;
  std::vector<double> ph;
  for (Index i = 0; i < 6 * m; ++i) {
    w.push_back(freq(rng));
    ph.push_back(phase(rng));
  }
  auto input = [&](double t) {
    Vector u = Vector::Zero(m);
    for (Index j = 0; j < m; ++j) {
      for (Index i = 0; i < 6; ++i) {
        const auto idx = static_cast<std::size_t>(j * 6 + i);
        u(j) += amplitude * std::sin(w[idx] * t + ph[idx]);
      }
    }
    return u;
  };
  const Matrix& a = sys.A();
  const Matrix& b = sys.B();
  Recording rec;
  Vector x = x0;
  for (std::size_t s = 0; s <= sub * intervals; ++s) {
    const double t = static_cast<double>(s) * dt;
    rec.traj.push_back(TrajectorySample{t, x, input(t)});
    if (s % sub == 0) rec.breaks.push_back(s);
    const Vector u0 = input(t);
    const Vector um = input(t + 0.5 * dt);
    const Vector u1 = input(t + dt);
    const Vector k1 = a * x + b * u0;
    const Vector k2 = a * (x + 0.5 * dt * k1) + b * um;
    const Vector k3 = a * (x + 0.5 * dt * k2) + b * um;
    const Vector k4 = a * (x + dt * k3) + b * u1;
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return rec;
}

std::vector<RegressorPair> second_order_pairs(std::size_t intervals, LtiSystem* sys_out = nullptr) {
  Matrix a(2, 2);
  a << 0.0, 1.0, -2.0, -3.0;
  Matrix b(2, 1);
  b << 0.0, 1.0;
  const LtiSystem sys(a, b);
  if (sys_out) *sys_out = sys;
  Vector x0(2);
  x0 << 0.5, 0.0;
  const Recording rec = record(sys, x0, 3.0, 1e-3, 50, intervals, 4);
  return build_regressors(rec.traj, rec.breaks);
}

TEST(RegressorTest, Dimensions) {
  const AdpDims d{3, 2};
  EXPECT_EQ(d.p(), 6);
  EXPECT_EQ(d.q(), 15);
  EXPECT_EQ(d.q_theta(), 12);
  const auto pairs = second_order_pairs(3);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0].phi.size(), 3);
  EXPECT_EQ(pairs[0].psi.size(), 6);
}

TEST(RegressorTest, ConstantTrajectoryHasZeroPhi) {
  std::vector<TrajectorySample> traj;
  for (int i = 0; i < 11; ++i) {
    traj.push_back(TrajectorySample{0.1 * i, Vector::Constant(2, 1.5), Vector::Zero(1)});
  }
  const std::vector<std::size_t> breaks{0, 5, 10};
  for (const auto& pair : build_regressors(traj, breaks)) EXPECT_EQ(pair.phi.norm(), 0.0);
}

TEST(RegressorTest, RejectsBadBreakpoints) {
  std::vector<TrajectorySample> traj;
  for (int i = 0; i < 5; ++i) traj.push_back(TrajectorySample{0.1 * i, Vector::Ones(1), Vector::Zero(1)});
  const std::vector<std::size_t> outside{0, 9};
  EXPECT_THROW(build_regressors(traj, outside), Error);
  const std::vector<std::size_t> single{0};
  EXPECT_THROW(build_regressors(traj, single), Error);
}

// psi^T theta(P) - phi^T vecs(P) for exact samples of dx = -x.
double exponential_defect(double dt) {
  std::vector<TrajectorySample> traj;
  const std::size_t steps = static_cast<std::size_t>(std::lround(1.0 / dt));
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    traj.push_back(TrajectorySample{t, Vector::Constant(1, std::exp(-t)), Vector::Zero(1)});
  }
  const std::vector<std::size_t> breaks{0, steps};
  const RegressorPair pair = build_regressors(traj, breaks).front();
  const SymMatrix p = SymMatrix::identity(1) * 1.7;
  const Vector theta = block_theta(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0), p);
  return std::abs(pair.psi.dot(theta) - pair.phi.dot(vecs(p)));
}

TEST(RegressorTest, ExponentialDecayIdentityIsSecondOrder) {
  const double coarse = exponential_defect(1e-2);
  const double fine = exponential_defect(5e-3);
  EXPECT_LT(coarse, 1e-4);
  EXPECT_NEAR(coarse / fine, 4.0, 0.1);
}

TEST(RegressorTest, IdentityHoldsForRandomP) {
  LtiSystem sys(Matrix::Zero(2, 2), Matrix::Zero(2, 1));
  const auto pairs = second_order_pairs(20, &sys);
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const SymMatrix p = testing::random_sym(2, rng);
    const Vector theta = block_theta(sys.A(), sys.B(), p);
    for (const auto& pair : pairs) {
      EXPECT_LE(std::abs(pair.psi.dot(theta) - pair.phi.dot(vecs(p))), 1e-6 * (1.0 + p.norm()));
    }
  }
}

TEST(RegressorTest, AccumulatorMatchesBatch) {
  Vector x0(2);
  x0 << 1.0, -1.0;
  LtiSystem sys(Matrix::Zero(2, 2), Matrix::Zero(2, 1));
  second_order_pairs(1, &sys);
  const Recording rec = record(sys, x0, 1.0, 1e-2, 7, 5, 2);
  const auto batch = build_regressors(rec.traj, rec.breaks);
  RegressorAccumulator acc(AdpDims{2, 1});
  acc.start(rec.traj.front());
  std::size_t next = 0;
  for (std::size_t i = 1; i < rec.traj.size(); ++i) {
    acc.add(rec.traj[i]);
    if (i % 7 == 0) {
      const RegressorPair pair = acc.cut();
      EXPECT_LE((pair.phi - batch[next].phi).norm(), 1e-14);
      EXPECT_LE((pair.psi - batch[next].psi).norm(), 1e-13);
      ++next;
    }
  }
  EXPECT_EQ(next, batch.size());
}

TEST(ThetaTest, ScalarExample) {
  const Vector theta = block_theta(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0),
                                   SymMatrix::identity(1));
  ASSERT_EQ(theta.size(), 3);
  EXPECT_DOUBLE_EQ(theta(0), -2.0);
  EXPECT_DOUBLE_EQ(theta(1), 1.0);
  EXPECT_DOUBLE_EQ(theta(2), 0.0);
}

TEST(ThetaTest, ExactMapIsLinear) {
  Rng rng(12);
  const Matrix a = testing::random_matrix(3, 3, rng);
  const Matrix b = testing::random_matrix(3, 2, rng);
  const Matrix map = exact_theta_map(a, b);
  EXPECT_EQ(map.rows(), AdpDims(3, 2).q());
  EXPECT_EQ(map.cols(), AdpDims(3, 2).p());
  for (int i = 0; i < 5; ++i) {
    const SymMatrix p = testing::random_sym(3, rng);
    EXPECT_LE((map * vecs(p) - block_theta(a, b, p)).norm(), 1e-12);
  }
}

TEST(ExtractTest, RoundTrip) {
  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 1 + trial % 4;
    const Index m = 1 + trial % 3;
    const Matrix a = testing::random_matrix(n, n, rng);
    const Matrix b = testing::random_matrix(n, m, rng);
    const SymMatrix p = testing::random_sym(n, rng);
    const CostWeights cost(SymMatrix::identity(n), testing::random_pd(m, rng));
    const AdpDims dims{n, m};
    const ModelTerms t = extract_model_terms(compact_theta(a, b, p), dims, cost);
    const Matrix ap = a.transpose() * p.dense() + p.dense() * a;
    const Matrix k = cost.R().dense().llt().solve(b.transpose() * p.dense());
    worst = std::max({worst, testing::max_abs(t.ap_term.dense() - ap), testing::max_abs(t.k_term - k)});
    const Vector from_block = compact_from_block(block_theta(a, b, p), dims);
    EXPECT_LE((from_block - compact_theta(a, b, p)).norm(), 1e-12);
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(ExtractTest, ZeroAndLengthMismatch) {
  const AdpDims dims{2, 1};
  const ModelTerms t = extract_model_terms(Vector::Zero(dims.q_theta()), dims, unit_cost(2, 1));
  EXPECT_EQ(t.ap_term.norm(), 0.0);
  EXPECT_EQ(t.k_term.norm(), 0.0);
  EXPECT_THROW(extract_model_terms(Vector::Zero(4), dims, unit_cost(2, 1)), DimensionError);
}

TEST(RlsTest, ZeroPsiLeavesStateUnchanged) {
  const AdpDims dims{2, 1};
  RlsState s = RlsState::initial(dims, 0.5);
  s.M = Matrix::Constant(dims.q(), dims.p(), 0.3);
  const RlsState next = rls_step(s, RegressorPair{Vector::Ones(dims.p()), Vector::Zero(dims.q())});
  EXPECT_EQ(next.Sigma, s.Sigma);
  EXPECT_EQ(next.M, s.M);
}

TEST(RlsTest, RecursiveMatchesBatchAtEveryStep) {
  const auto pairs = second_order_pairs(200);
  const double lambda = 1e-3;
  RlsState s = RlsState::initial(AdpDims{2, 1}, lambda);
  for (std::size_t l = 0; l < pairs.size(); ++l) {
    rls_update(s, pairs[l]);
    const Matrix batch = rls_batch(std::span(pairs).first(l + 1), lambda);
    EXPECT_LE(testing::max_abs(s.M - batch) / std::max(1.0, testing::max_abs(batch)), 1e-8) << l;
  }
}

TEST(RlsTest, SigmaStaysPdAndShrinks) {
  const auto pairs = second_order_pairs(100);
  RlsState s = RlsState::initial(AdpDims{2, 1}, 1.0);
  double prev = s.Sigma.dense().selfadjointView<Eigen::Lower>().eigenvalues().minCoeff();
  for (const auto& pair : pairs) {
    rls_update(s, pair);
    EXPECT_TRUE(is_pd(s.Sigma));
    const double now = s.Sigma.dense().selfadjointView<Eigen::Lower>().eigenvalues().minCoeff();
    EXPECT_LE(now, prev * (1.0 + 1e-9));
    prev = now;
  }
}

TEST(RlsTest, MapConvergesUnderExcitation) {
  LtiSystem sys(Matrix::Zero(2, 2), Matrix::Zero(2, 1));
  const auto pairs = second_order_pairs(1000, &sys);
  const AdpDims dims{2, 1};
  ASSERT_TRUE(check_pe(pairs, 0.0).satisfied);
  const Matrix truth = exact_theta_map(sys.A(), sys.B());
  const auto q = static_cast<std::size_t>(dims.q());
  double prev = INFINITY;
  for (std::size_t l : {q, 2 * q, 4 * q, std::size_t{1000}}) {
    const double err = (rls_batch(std::span(pairs).first(l), 1e-6) - truth).norm();
    EXPECT_LT(err, prev) << l;
    prev = err;
  }
  RlsState s = RlsState::initial(dims, 1e-6);
  for (const auto& pair : pairs) rls_update(s, pair);
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const SymMatrix p = testing::random_sym(2, rng);
    EXPECT_LE((s.M * vecs(p) - block_theta(sys.A(), sys.B(), p)).norm(), 1e-4 * (1.0 + p.norm()));
  }
}

TEST(PeTest, RankOneGramFails) {
  std::vector<RegressorPair> pairs(5, RegressorPair{Vector::Ones(1), Vector::Ones(3)});
  const PeReport r = check_pe(pairs, 1e-12);
  EXPECT_FALSE(r.satisfied);
  EXPECT_NEAR(r.min_eigenvalue, 0.0, 1e-12);
}

TEST(PeTest, CanonicalBasis) {
  std::vector<RegressorPair> pairs;
  for (Index j = 0; j < 6; ++j) pairs.push_back(RegressorPair{Vector::Ones(1), Vector::Unit(6, j)});
  const PeReport r = check_pe(pairs, 0.1);
  EXPECT_NEAR(r.min_eigenvalue, 1.0 / 6.0, 1e-14);
  EXPECT_TRUE(r.satisfied);
  EXPECT_FALSE(check_pe(pairs, 0.2).satisfied);
}

TEST(AdpRunTest, ExactMapTracksViRun) {
  const LtiSystem sys = kinematics_plant();
  const AdpDims dims{3, 1};
  ViConfig cfg{.P0 = SymMatrix::zero(3)};
  cfg.step = power_step_schedule(0.05, 0.3);
  cfg.trace_stride = 50;
  AdpOptions opts;
  opts.fixed_map = exact_theta_map(sys.A(), sys.B());
  const RegressorSource none = [](std::size_t) -> std::optional<RegressorPair> { return std::nullopt; };
  const AdpRun adp = adp_vi_run(none, dims, unit_cost(3, 1), cfg, opts);
  const ViRun ref = vi_run(sys, unit_cost(3, 1), cfg);
  EXPECT_EQ(adp.run.terminated, ref.terminated);
  EXPECT_EQ(adp.run.restarts, ref.restarts);
  EXPECT_NEAR(static_cast<double>(adp.run.iterations), static_cast<double>(ref.iterations), 2.0);
  const std::size_t common = std::min(adp.run.trace.size(), ref.trace.size());
  ASSERT_GT(common, 10u);
  for (std::size_t i = 0; i + 1 < common; ++i) {
    EXPECT_LE((adp.run.trace[i].P - ref.trace[i].P).norm(), 1e-9);
  }
  EXPECT_LE((adp.run.final - ref.final).norm(), 1e-8);
}

TEST(AdpRunTest, NoiselessScalarPlantLearnsRoot) {
  const LtiSystem sys(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0));
  const Recording rec = record(sys, Vector::Constant(1, 1.0), 2.0, 1e-3, 50, 400, 6);
  const auto pairs = build_regressors(rec.traj, rec.breaks);
  const AdpDims dims{1, 1};
  const RegressorSource cycle = [&](std::size_t k) -> std::optional<RegressorPair> {
    return pairs[k % pairs.size()];
  };
  ViConfig cfg{.P0 = SymMatrix::zero(1)};
  cfg.trace_stride = 0;
  AdpOptions opts;
  opts.lambda_init = 1e-6;
  const AdpRun run = adp_vi_run(cycle, dims, unit_cost(1, 1), cfg, opts);
  EXPECT_EQ(run.run.terminated, Termination::converged);
  EXPECT_NEAR(run.run.final(0, 0), std::sqrt(2.0) - 1.0, 1e-4);
}

TEST(AdpRunTest, ExhaustedDataThrows) {
  const auto pairs = second_order_pairs(10);
  ViConfig cfg{.P0 = SymMatrix::zero(2)};
  EXPECT_THROW(adp_vi_run(std::span<const RegressorPair>(pairs), AdpDims{2, 1}, unit_cost(2, 1), cfg),
               TrajectoryExhaustedError);
}

TEST(AdpRunTest, MapTraceAndDeterminism) {
  const auto pairs = second_order_pairs(300);
  const RegressorSource cycle = [&](std::size_t k) -> std::optional<RegressorPair> {
    return pairs[k % pairs.size()];
  };
  ViConfig cfg{.P0 = SymMatrix::zero(2)};
  cfg.max_iters = 2000;
  cfg.trace_stride = 10;
  AdpOptions opts;
  opts.map_trace_stride = 100;
  const AdpRun a = adp_vi_run(cycle, AdpDims{2, 1}, unit_cost(2, 1), cfg, opts);
  const AdpRun b = adp_vi_run(cycle, AdpDims{2, 1}, unit_cost(2, 1), cfg, opts);
  EXPECT_EQ(a.run.final, b.run.final);
  EXPECT_EQ(a.rls.M, b.rls.M);
  EXPECT_FALSE(a.M_trace.empty());
  for (const auto& e : a.run.trace) EXPECT_EQ(e.P.dense(), e.P.dense().transpose());
}

ModelNoise kinematics_noise(double scale) {
  ModelNoise noise;
  for (Index i = 0; i < 3; ++i) {
    Matrix d = Matrix::Zero(3, 3);
    d(i, (i + 1) % 3) = scale;
    noise.a_dirs.push_back(d);
  }
  noise.sigma = 1.0;
  return noise;
}

TEST(NoisyModelTest, ZeroSigmaIsViRun) {
  const LtiSystem sys = kinematics_plant();
  ViConfig cfg{.P0 = SymMatrix::zero(3)};
  cfg.step = power_step_schedule(0.05, 0.3);
  cfg.trace_stride = 25;
  ModelNoise noise = kinematics_noise(0.1);
  noise.sigma = 0.0;
  const ViRun ref = vi_run(sys, unit_cost(3, 1), cfg);
  for (ModelNoiseMode mode : {ModelNoiseMode::instantaneous, ModelNoiseMode::time_averaged}) {
    const NoisyModelRun r = noisy_model_vi(sys, unit_cost(3, 1), noise, cfg, mode, 7);
    EXPECT_EQ(r.run.final, ref.final);
    EXPECT_EQ(r.run.iterations, ref.iterations);
    ASSERT_EQ(r.run.trace.size(), ref.trace.size());
    for (std::size_t i = 0; i < ref.trace.size(); ++i) EXPECT_EQ(r.run.trace[i].P, ref.trace[i].P);
  }
}

TEST(NoisyModelTest, TimeAveragingBeatsInstantaneousSamples) {
  const LtiSystem sys = kinematics_plant();
  const SymMatrix p_star = oracle_are(sys, unit_cost(3, 1)).P_star;
  ViConfig cfg{.P0 = SymMatrix::zero(3)};
  cfg.step = power_step_schedule(0.05, 0.3);
  cfg.eps_bar = 1e-6;
  cfg.max_iters = 100000;
  cfg.trace_stride = 0;
  const ModelNoise noise = kinematics_noise(0.1);
  std::vector<double> averaged;
  std::vector<double> instant;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ta = noisy_model_vi(sys, unit_cost(3, 1), noise, cfg, ModelNoiseMode::time_averaged, seed);
    const auto in = noisy_model_vi(sys, unit_cost(3, 1), noise, cfg, ModelNoiseMode::instantaneous, seed);
    averaged.push_back((ta.run.final - p_star).norm());
    instant.push_back((in.run.final - p_star).norm());
    EXPECT_LE(averaged.back(), 1e-2) << "seed " << seed;
  }
  std::nth_element(averaged.begin(), averaged.begin() + 10, averaged.end());
  std::nth_element(instant.begin(), instant.begin() + 10, instant.end());
  EXPECT_GT(instant[10], averaged[10]);
  EXPECT_GT(instant[10], 0.0);
}

TEST(NoisyModelTest, SeededRunsRepeat) {
  const LtiSystem sys = kinematics_plant();
  ViConfig cfg{.P0 = SymMatrix::zero(3)};
  cfg.step = power_step_schedule(0.05, 0.3);
  cfg.max_iters = 3000;
  const ModelNoise noise = kinematics_noise(0.1);
  const auto a = noisy_model_vi(sys, unit_cost(3, 1), noise, cfg, ModelNoiseMode::instantaneous, 3);
  const auto b = noisy_model_vi(sys, unit_cost(3, 1), noise, cfg, ModelNoiseMode::instantaneous, 3);
  EXPECT_EQ(a.run.final, b.run.final);
  EXPECT_EQ(a.A_used, b.A_used);
}

}  // namespace
}  // namespace robust_dp
