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

#include "robust_dp/riccati.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace robust_dp {

LtiSystem::LtiSystem(Matrix a, Matrix b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() < 1 || a_.rows() != a_.cols()) {
    throw DimensionError("LtiSystem: A must be square and non-empty");
  }
  if (b_.rows() != a_.rows() || b_.cols() < 1) {
    throw DimensionError("LtiSystem: B must have n rows and at least one column");
  }
}

CostWeights::CostWeights(SymMatrix q, SymMatrix r) : q_(std::move(q)), r_(std::move(r)) {
  if (!is_pd(r_)) throw Error("CostWeights: R must be positive definite");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(q_.dense(), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, q_.norm())) {
    throw Error("CostWeights: Q must be positive semidefinite");
  }
  r_inv_ = SymMatrix(r_.dense().llt().solve(Matrix::Identity(r_.dim(), r_.dim()))).dense();
}

void CostWeights::check_against(const LtiSystem& sys) const {
  if (q_.dim() != sys.n() || r_.dim() != sys.m()) {
    throw DimensionError("CostWeights: Q must be n x n and R must be m x m");
  }
}

RiccatiOperator::RiccatiOperator(const LtiSystem& sys, const CostWeights& cost)
    : RiccatiOperator(sys.A(), sys.B() * cost.R_inv() * sys.B().transpose(), cost.Q()) {
  cost.check_against(sys);
}

RiccatiOperator::RiccatiOperator(Matrix a, Matrix g, SymMatrix q)
    : a_(std::move(a)), at_(a_.transpose()), g_(SymMatrix(g).dense()), q_(std::move(q)) {}

SymMatrix RiccatiOperator::operator()(const SymMatrix& p) const { return riccati_rhs(at_, g_, q_, p); }

SymMatrix riccati_rhs(const Matrix& at, const Matrix& g, const SymMatrix& q, const SymMatrix& p) {
  const Matrix& pd = p.dense();
  const Matrix atp = at * pd;
  Matrix out = atp + atp.transpose();
  out.noalias() -= pd * g * pd;
  out += q.dense();
  return SymMatrix(out);
}

SymMatrix riccati_residual(const SymMatrix& p, const LtiSystem& sys, const CostWeights& cost) {
  return RiccatiOperator(sys, cost)(p);
}

Matrix closed_loop_gain(const SymMatrix& p, const LtiSystem& sys, const CostWeights& cost) {
  cost.check_against(sys);
  return cost.R_inv() * sys.B().transpose() * p.dense();
}

AreSolution kleinman_raw(const Matrix& a, const Matrix& b, const SymMatrix& q, const SymMatrix& r,
                         const Matrix& k0, const KleinmanOptions& opts) {
  if (k0.rows() != b.cols() || k0.cols() != a.rows()) {
    throw DimensionError("solve_are_kleinman: K0 must be m x n");
  }
  if (!is_hurwitz(a - b * k0)) {
    throw NotStabilizingError("solve_are_kleinman: A - B K0 is not Hurwitz");
  }
  const Matrix r_inv = r.dense().llt().solve(Matrix::Identity(r.dim(), r.dim()));
  Matrix k = k0;
  SymMatrix p_prev = SymMatrix::zero(a.rows());
  for (int i = 0; i < opts.max_iterations; ++i) {
    const Matrix closed = a - b * k;
    const SymMatrix w(q.dense() + k.transpose() * r.dense() * k);
    SymMatrix p = solve_lyapunov(closed, w);
    k = r_inv * b.transpose() * p.dense();
    if (i > 0 && (p - p_prev).norm() <= opts.tolerance * std::max(1.0, p_prev.norm())) {
      const RiccatiOperator op(a, b * r_inv * b.transpose(), q);
      const double res = op(p).norm();
      return AreSolution{std::move(p), k, res, i + 1};
    }
    p_prev = std::move(p);
  }
  throw NoConvergenceError("solve_are_kleinman: no convergence within " +
                           std::to_string(opts.max_iterations) + " iterations");
}

AreSolution solve_are_kleinman(const LtiSystem& sys, const CostWeights& cost, const Matrix& k0,
                               const KleinmanOptions& opts) {
  cost.check_against(sys);
  return kleinman_raw(sys.A(), sys.B(), cost.Q(), cost.R(), k0, opts);
}

DmreTrajectory integrate_dmre(const LtiSystem& sys, const CostWeights& cost, const SymMatrix& p0,
                              double horizon, const DmreOptions& opts,
                              const MatrixDisturbance& disturbance) {
  if (!(opts.dt > 0.0)) throw Error("integrate_dmre: dt must be positive");
  if (p0.dim() != sys.n()) throw DimensionError("integrate_dmre: P0 has the wrong size");
  const RiccatiOperator op(sys, cost);
  const auto steps = static_cast<std::size_t>(std::llround(horizon / opts.dt));
  const std::size_t stride = std::max<std::size_t>(1, opts.stride);

  auto rhs = [&](double t, const SymMatrix& p) {
    SymMatrix d = op(p);
    if (disturbance) d += disturbance(t);
    return d;
  };

  DmreTrajectory out;
  out.t.push_back(0.0);
  out.P.push_back(p0);
  SymMatrix p = p0;
  const double h = opts.dt;
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * h;
    const SymMatrix k1 = rhs(t, p);
    const SymMatrix k2 = rhs(t + 0.5 * h, p + (0.5 * h) * k1);
    const SymMatrix k3 = rhs(t + 0.5 * h, p + (0.5 * h) * k2);
    const SymMatrix k4 = rhs(t + h, p + h * k3);
    SymMatrix next = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.all_finite()) {
      throw BlowUpError("integrate_dmre: non-finite state", t);
    }
    p = std::move(next);
    if ((s + 1) % stride == 0 || s + 1 == steps) {
      out.t.push_back(static_cast<double>(s + 1) * h);
      out.P.push_back(p);
    }
  }
  return out;
}

CostWeights scale_cost(const CostWeights& cost0, double lambda, ScalingMode mode) {
  if (!(lambda > 0.0)) throw Error("scale_cost: lambda must be positive");
  const double r_scale = mode == ScalingMode::proportional ? lambda : lambda * lambda;
  return CostWeights(lambda * cost0.Q(), r_scale * cost0.R());
}

double empirical_l2_gain(const DmreTrajectory& traj, const SymMatrix& p_star,
                         const MatrixDisturbance& disturbance) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 1; i < traj.t.size(); ++i) {
    const double w = traj.t[i] - traj.t[i - 1];
    const double e0 = (traj.P[i - 1] - p_star).norm();
    const double e1 = (traj.P[i] - p_star).norm();
    const double d0 = disturbance(traj.t[i - 1]).norm();
    const double d1 = disturbance(traj.t[i]).norm();
    num += 0.5 * w * (e0 * e0 + e1 * e1);
    den += 0.5 * w * (d0 * d0 + d1 * d1);
  }
  if (!(den > 0.0)) throw Error("empirical_l2_gain: zero disturbance energy");
  return num / den;
}

}  // namespace robust_dp
