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

// Coupled Riccati equations
//
//   A_i^T P_i + P_i A_i - P_i B_i R_i^-1 B_i^T P_i + Q_i + Delta_i(P) = 0,
//
// solved by synchronous per-node value iteration. A node only ever sees the
// other nodes' current P-values through its coupling function.

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "robust_dp/robust_vi.hpp"

namespace robust_dp {

/// P_j B_j R_j^-1 R_ij R_j^-1 B_j^T P_j - P_j B_j R_j^-1 B_j^T P_i - P_i B_j R_j^-1 B_j^T P_j,
/// the cross term of a non-zero-sum LQ game.
SymMatrix coupling_nzs(const SymMatrix& p_i, const SymMatrix& p_j, const Matrix& b_j,
                       const SymMatrix& r_j, const SymMatrix& r_ij);

/// Symmetrized P_2 R_1^-1 B_1^T P_1 B_1 + B_1^T P_1 B_1 R_1^-1 P_2 (unmatched
/// disturbance). B_1^T P_1 B_1 R_1^-1 must be a scalar or conform to P_2.
SymMatrix coupling_unmatched(const SymMatrix& p_2, const SymMatrix& p_1, const Matrix& b_1,
                             const SymMatrix& r_1);

struct NodeProblem {
  LtiSystem plant;
  CostWeights cost;
};

/// Delta_i evaluated on the current P of every node (index i is the node itself).
using NodeCoupling = std::function<SymMatrix(std::span<const SymMatrix> p)>;

struct Network {
  std::vector<NodeProblem> nodes;
  /// One entry per node; an empty function means no coupling.
  std::vector<NodeCoupling> coupling;

  void validate() const;
};

using PairCoupling = std::function<SymMatrix(const SymMatrix& p_self, const SymMatrix& p_other)>;

struct CoupledProblem {
  std::array<NodeProblem, 2> sub;
  std::array<PairCoupling, 2> coupling;

  Network as_network() const;
};

struct NetworkOptions {
  /// Ball radius ||P_i|| beyond which node i counts as diverged. Empty
  /// means 100 (1 + ||P_i0||).
  std::optional<double> safety_radius{};
  /// On divergence, restart once from P_0 with every step size halved.
  bool halve_on_divergence = true;
};

struct NetworkRun {
  /// Per-node runs; restarts are always 0.
  std::vector<ViRun> nodes;
  std::size_t iterations = 0;
  bool step_halved = false;

  bool all_converged() const;
};

/// Synchronous value iteration over all nodes. Uses step, eps_bar,
/// max_iters and trace_stride of each node's ViConfig; its boundary is
/// ignored. A node that meets its termination test stops updating and keeps
/// reporting its last value; the run ends when every node has stopped, or
/// as soon as one diverges.
NetworkRun network_vi_run(const Network& net, std::span<const ViConfig> configs,
                          const NetworkOptions& opts = {});

NetworkRun decentralized_vi_run(const CoupledProblem& prob, const std::array<ViConfig, 2>& configs,
                                const NetworkOptions& opts = {});

/// The default node step schedule 0.05 / (1 + k)^0.6.
StepSchedule default_node_schedule();

struct CoupledSolution {
  std::vector<SymMatrix> P_star;
  std::vector<double> residual_norms;
  std::size_t sweeps;
};

struct CoupledOracleOptions {
  double tol = 1e-10;
  std::size_t max_sweeps = 2000;
  /// Stabilizing gains for the uncoupled start; empty means zero gains
  /// (requires Hurwitz A_i).
  std::vector<Matrix> k0{};
};

/// Gauss-Seidel over nodes, started from the uncoupled Kleinman solutions.
/// Each node equation Riccati_i(P_i) + Delta_i(P) = 0 is solved by Newton's
/// method in P_i with the other nodes frozen; without coupling this is the
/// Kleinman iteration. Throws NoConvergenceError when the residuals stop
/// decreasing.
CoupledSolution solve_coupled_oracle(const Network& net, const CoupledOracleOptions& opts = {});

/// max_i ||Riccati_i(P_i) + Delta_i(P)||.
std::vector<double> coupled_residuals(const Network& net, std::span<const SymMatrix> p);

/// Non-negative least squares min ||A x - b||, x >= 0 (Lawson-Hanson).
Vector nnls(const Matrix& a, const Vector& b, std::size_t max_iterations = 0);

struct GainBoundReport {
  /// coefficients[i][j][d - 1] multiplies ||P_j - P_j*||^d in the bound on
  /// ||Delta_i(P) - Delta_i(P*)||, d = 1, 2, 3.
  std::array<std::array<std::array<double, 3>, 2>, 2> coefficients{};
  /// Factor that turns the least-squares fit into an upper bound on the samples.
  std::array<double, 2> bound_scale{};
};

/// Fits degree-3 monomial bounds on the coupling perturbations over the
/// given samples around `center`. Diagnostic only.
GainBoundReport gain_bound_report(const CoupledProblem& prob,
                                  const std::array<SymMatrix, 2>& center,
                                  std::span<const std::array<SymMatrix, 2>> samples);

}  // namespace robust_dp
