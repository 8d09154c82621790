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

#include <functional>
#include <vector>

#include "robust_dp/mat_core.hpp"

namespace robust_dp {

class NoConvergenceError : public Error {
 public:
  using Error::Error;
};

class NotStabilizingError : public Error {
 public:
  using Error::Error;
};

/// Raised when an integrator produces non-finite values.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double last_finite_time)
      : Error(what), last_finite_time_(last_finite_time) {}
  double last_finite_time() const { return last_finite_time_; }

 private:
  double last_finite_time_;
};

/// dx/dt = A x + B u.
class LtiSystem {
 public:
  LtiSystem(Matrix a, Matrix b);

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  Index n() const { return a_.rows(); }
  Index m() const { return b_.cols(); }

 private:
  Matrix a_;
  Matrix b_;
};

/// Quadratic weights Q >= 0, R > 0. Construction rejects anything else.
class CostWeights {
 public:
  CostWeights(SymMatrix q, SymMatrix r);

  const SymMatrix& Q() const { return q_; }
  const SymMatrix& R() const { return r_; }
  const Matrix& R_inv() const { return r_inv_; }

  /// Checks the dimensions against a plant; throws DimensionError.
  void check_against(const LtiSystem& sys) const;

 private:
  SymMatrix q_;
  SymMatrix r_;
  Matrix r_inv_;
};

struct AreSolution {
  SymMatrix P_star;
  Matrix K_star;
  double residual_norm;
  int iterations;
};

/// Cached evaluation of P -> A^T P + P A - P G P + Q with G = B R^-1 B^T.
/// The value-iteration loops call this millions of times.
class RiccatiOperator {
 public:
  RiccatiOperator(const LtiSystem& sys, const CostWeights& cost);
  RiccatiOperator(Matrix a, Matrix g, SymMatrix q);

  SymMatrix operator()(const SymMatrix& p) const;

  const Matrix& A() const { return a_; }
  const Matrix& G() const { return g_; }
  const SymMatrix& Q() const { return q_; }

 private:
  Matrix a_;
  Matrix at_;
  Matrix g_;
  SymMatrix q_;
};

/// A^T P + P A - P B R^-1 B^T P + Q, with A^T P + P A supplied by the caller.
/// Shared by every loop that forms the Riccati right-hand side so that
/// equal inputs give bit-equal outputs across modules.
SymMatrix riccati_rhs(const Matrix& at, const Matrix& g, const SymMatrix& q, const SymMatrix& p);

SymMatrix riccati_residual(const SymMatrix& p, const LtiSystem& sys, const CostWeights& cost);

/// R^-1 B^T P.
Matrix closed_loop_gain(const SymMatrix& p, const LtiSystem& sys, const CostWeights& cost);

struct KleinmanOptions {
  double tolerance = 1e-11;
  int max_iterations = 200;
};

/// Newton-Kleinman policy iteration from a stabilizing gain K0. This is
/// the independent reference every iterative method is checked against.
AreSolution solve_are_kleinman(const LtiSystem& sys, const CostWeights& cost, const Matrix& k0,
                               const KleinmanOptions& opts = {});

/// Same iteration on raw matrices; Q only needs to be symmetric. Used by the
/// coupled-ARE oracle where the effective state weight can be indefinite.
AreSolution kleinman_raw(const Matrix& a, const Matrix& b, const SymMatrix& q, const SymMatrix& r,
                         const Matrix& k0, const KleinmanOptions& opts = {});

using MatrixDisturbance = std::function<SymMatrix(double t)>;

struct DmreOptions {
  double dt = 1e-3;
  /// Samples are kept every `stride` steps (plus t = 0 and t = T).
  std::size_t stride = 100;
};

struct DmreTrajectory {
  std::vector<double> t;
  std::vector<SymMatrix> P;
};

/// Classical RK4 on dP/dt = A^T P + P A - P G P + Q + Delta(t).
/// Throws BlowUpError with the last finite sample time.
DmreTrajectory integrate_dmre(const LtiSystem& sys, const CostWeights& cost, const SymMatrix& p0,
                              double horizon, const DmreOptions& opts = {},
                              const MatrixDisturbance& disturbance = {});

enum class ScalingMode { proportional, gain_assignment };

/// proportional: (lambda Q, lambda R). gain_assignment: (lambda Q, lambda^2 R).
CostWeights scale_cost(const CostWeights& cost0, double lambda, ScalingMode mode);

/// Energy ratio (int |P(t) - P*|_F^2 dt) / (int |Delta(t)|_F^2 dt) over the
/// sampled trajectory, trapezoidal in t.
double empirical_l2_gain(const DmreTrajectory& traj, const SymMatrix& p_star,
                         const MatrixDisturbance& disturbance);

}  // namespace robust_dp
