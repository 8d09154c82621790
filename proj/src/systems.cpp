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

#include "robust_dp/systems.hpp"

#include <cmath>
#include <random>

#include <Eigen/SVD>

namespace robust_dp {

Matrix bass_stabilizing_gain(const LtiSystem& sys) {
  const Index n = sys.n();
  const double beta = sys.A().norm() + 1.0;
  const Matrix shifted = -(sys.A() + beta * Matrix::Identity(n, n)).transpose();
  const SymMatrix z = solve_lyapunov(shifted, SymMatrix(2.0 * sys.B() * sys.B().transpose()));
  if (!is_pd(z)) throw NotStabilizingError("bass_stabilizing_gain: (A, B) is not controllable");
  return sys.B().transpose() * z.dense().llt().solve(Matrix::Identity(n, n));
}

AreSolution oracle_are(const LtiSystem& sys, const CostWeights& cost) {
  const Matrix k0 =
      is_hurwitz(sys.A()) ? Matrix::Zero(sys.m(), sys.n()) : bass_stabilizing_gain(sys);
  return solve_are_kleinman(sys, cost, k0);
}

LtiSystem kinematics_plant(const KinematicsParams& p) {
  if (!(p.mass > 0.0) || !(p.time_constant > 0.0)) {
    throw Error("kinematics_plant: mass and time constant must be positive");
  }
  Matrix a(3, 3);
  a << 0.0, 1.0, 0.0,
       0.0, -p.damping / p.mass, 1.0 / p.mass,
       0.0, 0.0, -1.0 / p.time_constant;
  Matrix b(3, 1);
  b << 0.0, 0.0, 1.0 / p.time_constant;
  return LtiSystem(a, b);
}

SdeSystem timeseries_sde(const TimeSeriesParams& p) {
  Matrix a(3, 3);
  a << 0.0, 1.0, 0.0,
       0.0, 0.0, 1.0,
       p.a1, p.a2, p.a3;
  Matrix b(3, 1);
  b << 0.0, 0.0, 1.0;
  std::vector<Vector> sigma;
  sigma.push_back(p.sigma1 * Vector::Unit(3, 0));
  sigma.push_back(p.sigma2 * Vector::Unit(3, 1));
  sigma.push_back(p.sigma3 * Vector::Unit(3, 2));
  sigma.push_back(p.sigma0 * Vector::Unit(3, 2));
  return SdeSystem{LtiSystem(a, b), std::move(sigma)};
}

namespace {

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  }
  return out;
}

}  // namespace

RandomSystem random_stable_system(std::uint64_t seed, const RandomSystemOptions& opts) {
  if (opts.max_n < 1 || opts.max_m < 1) throw Error("random_stable_system: bad dimension bounds");
  if (!(opts.eig_min > 0.0) || opts.eig_max < opts.eig_min) {
    throw Error("random_stable_system: need 0 < eig_min <= eig_max");
  }
  Rng rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Index n = std::uniform_int_distribution<Index>(1, opts.max_n)(rng);
    const Index m = std::uniform_int_distribution<Index>(1, std::min(opts.max_m, n))(rng);
    std::uniform_real_distribution<double> eig(opts.eig_min, opts.eig_max);
    Vector lambda(n);
    for (Index i = 0; i < n; ++i) lambda(i) = -eig(rng);
    Matrix t;
    for (;;) {
      t = Matrix::Identity(n, n) + 0.3 * gaussian(n, n, rng);
      Eigen::JacobiSVD<Matrix> svd(t);
      const Vector s = svd.singularValues();
      if (s(n - 1) > 0.0 && s(0) / s(n - 1) <= 4.0) break;
    }
    const Matrix a = t * lambda.asDiagonal() * t.inverse();
    const Matrix b = gaussian(n, m, rng) / std::sqrt(static_cast<double>(n));
    const Matrix sq = gaussian(n, n, rng);
    const Matrix su = gaussian(m, m, rng);
    const SymMatrix q(Matrix::Identity(n, n) + 0.2 * sq * sq.transpose() / static_cast<double>(n));
    const SymMatrix r(Matrix::Identity(m, m) + 0.2 * su * su.transpose() / static_cast<double>(m));
    LtiSystem sys(a, b);
    CostWeights cost(q, r);
    AreSolution oracle = solve_are_kleinman(sys, cost, Matrix::Zero(m, n));
    if (oracle.P_star.norm() <= opts.max_p_norm) {
      return RandomSystem{std::move(sys), std::move(cost), std::move(oracle)};
    }
  }
  throw Error("random_stable_system: no admissible draw");
}

std::vector<double> Market::excess() const {
  std::vector<double> out;
  out.reserve(returns.size());
  for (double b : returns) out.push_back(b - rate);
  return out;
}

Market random_market(std::uint64_t seed, std::size_t stocks, double rate, double b_max,
                     double volatility) {
  if (stocks == 0) throw Error("random_market: need at least one stock");
  if (!(b_max > rate)) throw Error("random_market: b_max must exceed the interest rate");
  Rng rng(seed);
  // (rate, b_max]: reflect the half-open [rate, b_max) draw.
  std::uniform_real_distribution<double> draw(rate, b_max);
  Market out{rate, {}, std::vector<double>(stocks, volatility)};
  for (std::size_t i = 0; i < stocks; ++i) out.returns.push_back(rate + b_max - draw(rng));
  return out;
}

Network portfolio_game(double rate, const std::vector<double>& excess, const GameWeights& w) {
  const std::size_t count = excess.size();
  Network net;
  const SymMatrix r_own = SymMatrix::identity(1) * w.r_own;
  const SymMatrix r_cross = SymMatrix::identity(1) * w.r_cross;
  std::vector<Matrix> b;
  for (double e : excess) b.push_back(Matrix::Constant(1, 1, e));
  for (std::size_t i = 0; i < count; ++i) {
    net.nodes.push_back(NodeProblem{LtiSystem(Matrix::Constant(1, 1, rate), b[i]),
                                    CostWeights(SymMatrix::identity(1) * w.q, r_own)});
    if (!w.coupled || count == 1) {
      net.coupling.emplace_back();
      continue;
    }
    net.coupling.emplace_back([i, b, r_own, r_cross](std::span<const SymMatrix> p) {
      SymMatrix total = SymMatrix::zero(1);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (j != i) total += coupling_nzs(p[i], p[j], b[j], r_own, r_cross);
      }
      return total;
    });
  }
  return net;
}

double scalar_are_root(double a, double b, double q, double r) {
  if (b == 0.0) throw Error("scalar_are_root: B must be non-zero");
  return r * (a + std::sqrt(a * a + q * b * b / r)) / (b * b);
}

}  // namespace robust_dp
