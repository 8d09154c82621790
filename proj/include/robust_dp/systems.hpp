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

// Plants used by the experiments and the test suites.

#include <cstdint>
#include <vector>

#include "robust_dp/decentralized.hpp"
#include "robust_dp/ergodic.hpp"

namespace robust_dp {

/// K = B^T Z^-1 with (A + beta I) Z + Z (A + beta I)^T = 2 B B^T and
/// beta = |A|_F + 1. Stabilizes any controllable pair.
Matrix bass_stabilizing_gain(const LtiSystem& sys);

/// Kleinman from K0 = 0 when A is Hurwitz, otherwise from the Bass gain.
AreSolution oracle_are(const LtiSystem& sys, const CostWeights& cost);

struct KinematicsParams {
  double mass = 1.0;
  double damping = 5.0;
  double time_constant = 0.1;
};

/// Position, velocity, actuator force driven through a first-order lag:
/// A = [[0, 1, 0], [0, -b/m, 1/m], [0, 0, -1/tau]], B = [0, 0, 1/tau]^T.
LtiSystem kinematics_plant(const KinematicsParams& p = {});

struct TimeSeriesParams {
  double a1 = -4.0;
  double a2 = -1.0;
  double a3 = -4.0;
  double sigma0 = 1.0;
  double sigma1 = 0.6;
  double sigma2 = 0.4;
  double sigma3 = 0.5;
};

/// Companion-form third-order series with observation noise on each state
/// and the driving noise on the last one.
SdeSystem timeseries_sde(const TimeSeriesParams& p = {});

struct RandomSystem {
  LtiSystem sys;
  CostWeights cost;
  AreSolution oracle;
};

struct RandomSystemOptions {
  Index max_n = 6;
  Index max_m = 3;
  double eig_min = 0.5;
  double eig_max = 3.0;
  /// Draws whose ||P*||_F exceeds this are discarded and redrawn.
  double max_p_norm = 8.0;
};

/// A = T diag(-lambda) T^-1 with T = I + 0.3 N(0, 1) (redrawn until
/// cond(T) <= 4), B = N(0, 1) / sqrt(n), Q = I + 0.2 S S^T / n,
/// R = I + 0.2 U U^T / m. Dimensions uniform in [1, max_n] x [1, max_m].
RandomSystem random_stable_system(std::uint64_t seed, const RandomSystemOptions& opts = {});

struct Market {
  double rate;                  // bond interest rate r
  std::vector<double> returns;  // appreciation rates b_i
  std::vector<double> volatility;

  /// b_i - r.
  std::vector<double> excess() const;
};

/// b_i uniform in (r, b_max], diagonal volatility.
Market random_market(std::uint64_t seed, std::size_t stocks, double rate = 0.025,
                     double b_max = 0.15, double volatility = 0.2);

struct GameWeights {
  double q = 1e-3;
  double r_own = 2e-2;
  double r_cross = 1e-4;
  bool coupled = true;
};

/// The N-player non-zero-sum game on the shared scalar wealth deviation:
/// node i has A_i = r, B_i = excess_i, Q_i = q, R_i = r_own, and couples to
/// every other node through coupling_nzs with R_ij = r_cross.
Network portfolio_game(double rate, const std::vector<double>& excess, const GameWeights& w);

/// R (r + sqrt(r^2 + Q B^2 / R)) / B^2, the positive root of the scalar ARE
/// 2 r P - P^2 B^2 / R + Q = 0.
double scalar_are_root(double a, double b, double q, double r);

}  // namespace robust_dp
