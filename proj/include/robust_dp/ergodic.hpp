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

// Ergodic (long-run average) LQ control from a single SDE path.
//
//   dx = (A x + B u) dt + sum_i sigma_i dw_i
//   du = -K0 dx + sum_i sigma_u,i dv_i
//
// With psi = [bar_vec(x); 2 (x (x) u); 1], Ito's rule gives
//   d(x^T P x) = psi^T theta(P) dt + martingale,
//   theta(P) = [vecs(PA + A^T P); ves(B^T P); sum_i sigma_i^T P sigma_i],
// so theta is recovered by regressing increments of x^T P x on psi.

#include <cstdint>
#include <optional>
#include <vector>

#include "robust_dp/adp.hpp"

namespace robust_dp {

class SingularGramError : public Error {
 public:
  SingularGramError(const std::string& what, double min_eigenvalue)
      : Error(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

struct SdeSystem {
  LtiSystem plant;
  std::vector<Vector> sigma_x;  // additive noise directions, each length n
};

struct ExplorationPolicy {
  Matrix K0;                    // m x n
  std::vector<Vector> sigma_u;  // exploration directions, each length m
};

struct SdePath {
  std::vector<double> t;
  std::vector<Vector> x;
  std::vector<Vector> u;
};

/// Euler-Maruyama stepper for the joint (x, u) diffusion. Draws the state
/// noise first, then the exploration noise, from one seeded stream.
class SdeStepper {
 public:
  SdeStepper(const SdeSystem& sys, const ExplorationPolicy& pol, double dt, std::uint64_t seed,
             const Vector& x0);

  void step();

  double t() const { return t_; }
  const Vector& x() const { return x_; }
  const Vector& u() const { return u_; }

 private:
  const SdeSystem& sys_;
  const ExplorationPolicy& pol_;
  double dt_;
  double sqrt_dt_;
  std::size_t steps_ = 0;
  double t_ = 0.0;
  Vector x_;
  Vector u_;
  Vector dx_;
  Rng rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Samples at t = 0, dt, ..., round(T/dt) dt. x0 defaults to zero;
/// u(0) = -K0 x0. Throws BlowUpError on a non-finite state.
SdePath simulate_sde(const SdeSystem& sys, const ExplorationPolicy& pol, double horizon, double dt,
                     std::uint64_t seed, const std::optional<Vector>& x0 = std::nullopt);

/// psi(x, u) = [bar_vec(x); 2 (x (x) u); 1].
Vector ergodic_regressor(const Vector& x, const Vector& u);

/// Integrals from 0 to t: gram = int psi psi^T dt (trapezoid) and
/// cross = sum_j psi(t_j) (bar_vec(x_{j+1}) - bar_vec(x_j))^T, so that
/// int psi d(x^T P x) = cross * vecs(P).
struct ThetaStatistics {
  Matrix gram;
  Matrix cross;
  double t;
};

class ThetaAccumulator {
 public:
  ThetaAccumulator(Index n, Index m);

  void start(double t, const Vector& x, const Vector& u);
  void add(double t, const Vector& x, const Vector& u);
  ThetaStatistics snapshot() const;

 private:
  Index n_;
  Index m_;
  bool open_ = false;
  double t0_ = 0.0;
  double t_last_ = 0.0;
  Vector psi_last_;
  Matrix outer_last_;
  Vector xbar_last_;
  Matrix gram_;
  Matrix cross_;
};

/// Statistics over the samples with t_j <= t.
ThetaStatistics theta_statistics(const SdePath& path, double t);

/// Solves gram^-1 cross. Throws SingularGramError when the normalized Gram
/// has no usable positive spectrum.
Matrix theta_map(const ThetaStatistics& stats);

/// theta_hat(P, t) of length n(n+1)/2 + n m + 1.
Vector estimate_theta(const ThetaStatistics& stats, const SymMatrix& p);
Vector estimate_theta(const SdePath& path, const SymMatrix& p, double t);

/// lambda_min of (1/t) int_0^t psi psi^T dt.
double empirical_gram_check(const SdePath& path, double t);

/// t_k = t0 (k + 1).
std::vector<double> proportional_schedule(double t0, std::size_t count);
/// t_k = t0 + k * interval.
std::vector<double> uniform_schedule(double t0, double interval, std::size_t count);

struct ErgodicConfig {
  double dt = 1e-3;
  std::vector<double> t_schedule = proportional_schedule(5.0, 200);
  ViConfig vi;
  std::optional<Vector> x0{};
};

/// One simulated path, one theta map per t_k, one value-iteration step per
/// t_k. The run ends at the last t_k at the latest. Requires Q, R > 0.
ViRun ergodic_adp_run(const SdeSystem& sys, const ExplorationPolicy& pol, const CostWeights& cost,
                      const ErgodicConfig& cfg, std::uint64_t seed);

/// sum_i sigma_i^T P sigma_i, the optimal average cost when P = P*.
double ergodic_cost(const SdeSystem& sys, const SymMatrix& p);

}  // namespace robust_dp
