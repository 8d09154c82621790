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

#include "robust_dp/ergodic.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace robust_dp {

namespace {

// Relative floor on the normalized Gram spectrum below which the regression
// is reported as singular.
constexpr double kGramFloor = 1e-12;

void check_sde(const SdeSystem& sys, const ExplorationPolicy& pol) {
  const Index n = sys.plant.n();
  const Index m = sys.plant.m();
  if (pol.K0.rows() != m || pol.K0.cols() != n) {
    throw DimensionError("exploration policy: K0 must be m x n");
  }
  for (const auto& s : sys.sigma_x) {
    if (s.size() != n) throw DimensionError("SdeSystem: noise directions must have length n");
  }
  for (const auto& s : pol.sigma_u) {
    if (s.size() != m) throw DimensionError("exploration policy: directions must have length m");
  }
}

std::size_t sample_index(double t, double dt) {
  return static_cast<std::size_t>(std::floor(t / dt + 1e-9));
}

}  // namespace

SdeStepper::SdeStepper(const SdeSystem& sys, const ExplorationPolicy& pol, double dt,
                       std::uint64_t seed, const Vector& x0)
    : sys_(sys), pol_(pol), dt_(dt), sqrt_dt_(std::sqrt(dt)), x_(x0), rng_(seed) {
  if (!(dt > 0.0)) throw Error("simulate_sde: dt must be positive");
  check_sde(sys, pol);
  if (x0.size() != sys.plant.n()) throw DimensionError("simulate_sde: x0 must have length n");
  u_ = -pol.K0 * x_;
  dx_.resize(x_.size());
}

void SdeStepper::step() {
  dx_.noalias() = sys_.plant.A() * x_;
  dx_.noalias() += sys_.plant.B() * u_;
  dx_ *= dt_;
  for (const auto& s : sys_.sigma_x) dx_ += (sqrt_dt_ * normal_(rng_)) * s;
  u_.noalias() -= pol_.K0 * dx_;
  for (const auto& s : pol_.sigma_u) u_ += (sqrt_dt_ * normal_(rng_)) * s;
  x_ += dx_;
  ++steps_;
  t_ = static_cast<double>(steps_) * dt_;
  if (!x_.allFinite() || !u_.allFinite()) {
    throw BlowUpError("simulate_sde: non-finite state", static_cast<double>(steps_ - 1) * dt_);
  }
}

SdePath simulate_sde(const SdeSystem& sys, const ExplorationPolicy& pol, double horizon, double dt,
                     std::uint64_t seed, const std::optional<Vector>& x0) {
  if (!(dt > 0.0)) throw Error("simulate_sde: dt must be positive");
  if (horizon < 0.0) throw Error("simulate_sde: horizon must be non-negative");
  SdeStepper stepper(sys, pol, dt, seed, x0.value_or(Vector::Zero(sys.plant.n())));
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  SdePath path;
  path.t.reserve(steps + 1);
  path.x.reserve(steps + 1);
  path.u.reserve(steps + 1);
  path.t.push_back(stepper.t());
  path.x.push_back(stepper.x());
  path.u.push_back(stepper.u());
  for (std::size_t s = 0; s < steps; ++s) {
    stepper.step();
    path.t.push_back(stepper.t());
    path.x.push_back(stepper.x());
    path.u.push_back(stepper.u());
  }
  return path;
}

Vector ergodic_regressor(const Vector& x, const Vector& u) {
  const Index p = x.size() * (x.size() + 1) / 2;
  Vector psi(p + x.size() * u.size() + 1);
  psi.head(p) = bar_vec(x);
  Index c = p;
  for (Index j = 0; j < x.size(); ++j) {
    for (Index i = 0; i < u.size(); ++i) psi(c++) = 2.0 * x(j) * u(i);
  }
  psi(c) = 1.0;
  return psi;
}

ThetaAccumulator::ThetaAccumulator(Index n, Index m) : n_(n), m_(m) {
  const Index p = n * (n + 1) / 2;
  const Index d = p + n * m + 1;
  gram_ = Matrix::Zero(d, d);
  cross_ = Matrix::Zero(d, p);
}

void ThetaAccumulator::start(double t, const Vector& x, const Vector& u) {
  if (x.size() != n_ || u.size() != m_) throw DimensionError("ThetaAccumulator: wrong sizes");
  open_ = true;
  t0_ = t;
  t_last_ = t;
  psi_last_ = ergodic_regressor(x, u);
  outer_last_ = psi_last_ * psi_last_.transpose();
  xbar_last_ = bar_vec(x);
  gram_.setZero();
  cross_.setZero();
}

void ThetaAccumulator::add(double t, const Vector& x, const Vector& u) {
  if (!open_) throw Error("ThetaAccumulator: add() before start()");
  if (!(t > t_last_)) throw Error("ThetaAccumulator: sample times must increase");
  if (x.size() != n_ || u.size() != m_) throw DimensionError("ThetaAccumulator: wrong sizes");
  Vector xbar = bar_vec(x);
  cross_.noalias() += psi_last_ * (xbar - xbar_last_).transpose();
  Vector psi = ergodic_regressor(x, u);
  Matrix outer = psi * psi.transpose();
  gram_ += (0.5 * (t - t_last_)) * (outer_last_ + outer);
  psi_last_ = std::move(psi);
  outer_last_ = std::move(outer);
  xbar_last_ = std::move(xbar);
  t_last_ = t;
}

ThetaStatistics ThetaAccumulator::snapshot() const {
  if (!open_) throw Error("ThetaAccumulator: snapshot() before start()");
  return ThetaStatistics{gram_, cross_, t_last_ - t0_};
}

ThetaStatistics theta_statistics(const SdePath& path, double t) {
  if (path.t.empty()) throw Error("theta_statistics: empty path");
  if (t < path.t.front() || t > path.t.back() + 1e-9) {
    throw Error("theta_statistics: t outside the path");
  }
  ThetaAccumulator acc(path.x.front().size(), path.u.front().size());
  acc.start(path.t[0], path.x[0], path.u[0]);
  for (std::size_t j = 1; j < path.t.size() && path.t[j] <= t + 1e-12; ++j) {
    acc.add(path.t[j], path.x[j], path.u[j]);
  }
  return acc.snapshot();
}

namespace {

double gram_min_eigenvalue(const ThetaStatistics& stats, double* max_out = nullptr) {
  if (!(stats.t > 0.0)) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(stats.gram / stats.t, Eigen::EigenvaluesOnly);
  if (max_out) *max_out = eig.eigenvalues().maxCoeff();
  return eig.eigenvalues().minCoeff();
}

}  // namespace

Matrix theta_map(const ThetaStatistics& stats) {
  double lmax = 0.0;
  const double lmin = gram_min_eigenvalue(stats, &lmax);
  if (!(lmin > kGramFloor * std::max(lmax, 0.0))) {
    throw SingularGramError("estimate_theta: singular Gram matrix at t = " +
                                std::to_string(stats.t) +
                                " (min eigenvalue " + std::to_string(lmin) + ")",
                            lmin);
  }
  return stats.gram.llt().solve(stats.cross);
}

Vector estimate_theta(const ThetaStatistics& stats, const SymMatrix& p) {
  if (stats.cross.cols() != vecs(p).size()) {
    throw DimensionError("estimate_theta: P has the wrong size");
  }
  return theta_map(stats) * vecs(p);
}

Vector estimate_theta(const SdePath& path, const SymMatrix& p, double t) {
  return estimate_theta(theta_statistics(path, t), p);
}

double empirical_gram_check(const SdePath& path, double t) {
  return gram_min_eigenvalue(theta_statistics(path, t));
}

std::vector<double> proportional_schedule(double t0, std::size_t count) {
  if (!(t0 > 0.0)) throw Error("proportional_schedule: t0 must be positive");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = t0 * static_cast<double>(k + 1);
  return out;
}

std::vector<double> uniform_schedule(double t0, double interval, std::size_t count) {
  if (!(t0 > 0.0) || !(interval > 0.0)) throw Error("uniform_schedule: need t0, interval > 0");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = t0 + interval * static_cast<double>(k);
  return out;
}

ViRun ergodic_adp_run(const SdeSystem& sys, const ExplorationPolicy& pol, const CostWeights& cost,
                      const ErgodicConfig& cfg, std::uint64_t seed) {
  cost.check_against(sys.plant);
  if (!is_pd(cost.Q())) throw Error("ergodic_adp_run: requires Q > 0");
  if (cfg.vi.P0.dim() != sys.plant.n()) throw DimensionError("ergodic_adp_run: P0 has the wrong size");
  const auto& ts = cfg.t_schedule;
  if (ts.empty()) throw Error("ergodic_adp_run: empty t schedule");
  if (!(ts.front() > 0.0)) throw Error("ergodic_adp_run: t_0 must be positive");
  for (std::size_t k = 1; k < ts.size(); ++k) {
    if (!(ts[k] > ts[k - 1])) throw Error("ergodic_adp_run: t schedule must increase");
  }

  const AdpDims dims{sys.plant.n(), sys.plant.m()};
  const Index rows = dims.q_theta();
  SdeStepper stepper(sys, pol, cfg.dt, seed, cfg.x0.value_or(Vector::Zero(dims.n)));
  ThetaAccumulator acc(dims.n, dims.m);
  acc.start(stepper.t(), stepper.x(), stepper.u());

  const std::size_t count = std::min(ts.size(), cfg.vi.max_iters);
  std::vector<Matrix> maps;
  maps.reserve(count);
  std::size_t steps = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t target = sample_index(ts[k], cfg.dt);
    for (; steps < target; ++steps) {
      stepper.step();
      acc.add(stepper.t(), stepper.x(), stepper.u());
    }
    try {
      maps.push_back(theta_map(acc.snapshot()).topRows(rows));
    } catch (const SingularGramError& e) {
      if (k == 0) {
        throw SingularGramError(std::string(e.what()) + "; increase t_0 or the excitation",
                                e.min_eigenvalue());
      }
      throw;
    }
  }

  ViConfig vi = cfg.vi;
  vi.max_iters = count;
  return run_value_iteration(vi, [&](std::size_t k, const SymMatrix& p, double h) {
    const Vector theta = maps[k] * vecs(p);
    SymMatrix half = model_free_half_step(p, h, extract_model_terms(theta, dims, cost), cost);
    const double res = (half - p).norm() / h;
    return HalfStep{std::move(half), res};
  });
}

double ergodic_cost(const SdeSystem& sys, const SymMatrix& p) {
  double total = 0.0;
  for (const auto& s : sys.sigma_x) total += s.dot(p.dense() * s);
  return total;
}

}  // namespace robust_dp
