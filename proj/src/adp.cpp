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

#include "robust_dp/adp.hpp"

#include <Eigen/Eigenvalues>

namespace robust_dp {

namespace {

Vector stack(const Vector& x, const Vector& u) {
  Vector z(x.size() + u.size());
  z << x, u;
  return z;
}

// Position of (i, j), i <= j, inside vecs of an N x N matrix.
Index upper_index(Index i, Index j, Index big_n) { return i * big_n - i * (i - 1) / 2 + (j - i); }

}  // namespace

RegressorAccumulator::RegressorAccumulator(AdpDims dims) : dims_(dims) {}

void RegressorAccumulator::start(const TrajectorySample& s) {
  if (s.x.size() != dims_.n || s.u.size() != dims_.m) {
    throw DimensionError("RegressorAccumulator: sample has the wrong dimensions");
  }
  open_ = true;
  t_last_ = s.t;
  zbar_last_ = bar_vec(stack(s.x, s.u));
  xbar_start_ = bar_vec(s.x);
  xbar_last_ = xbar_start_;
  psi_ = Vector::Zero(dims_.q());
}

void RegressorAccumulator::add(const TrajectorySample& s) {
  if (!open_) throw Error("RegressorAccumulator: add() before start()");
  if (!(s.t > t_last_)) throw Error("RegressorAccumulator: sample times must increase");
  if (s.x.size() != dims_.n || s.u.size() != dims_.m) {
    throw DimensionError("RegressorAccumulator: sample has the wrong dimensions");
  }
  Vector zbar = bar_vec(stack(s.x, s.u));
  psi_ += (0.5 * (s.t - t_last_)) * (zbar_last_ + zbar);
  zbar_last_ = std::move(zbar);
  xbar_last_ = bar_vec(s.x);
  t_last_ = s.t;
}

RegressorPair RegressorAccumulator::cut() {
  if (!open_) throw Error("RegressorAccumulator: cut() before start()");
  RegressorPair pair{xbar_last_ - xbar_start_, psi_};
  xbar_start_ = xbar_last_;
  psi_.setZero();
  return pair;
}

std::vector<RegressorPair> build_regressors(std::span<const TrajectorySample> traj,
                                            std::span<const std::size_t> breakpoints) {
  if (breakpoints.size() < 2) throw Error("build_regressors: need at least two breakpoints");
  if (traj.empty()) throw Error("build_regressors: empty trajectory");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (breakpoints[i] >= traj.size()) {
      throw Error("build_regressors: breakpoint outside the trajectory");
    }
    if (i > 0 && breakpoints[i] <= breakpoints[i - 1]) {
      throw Error("build_regressors: breakpoints must increase");
    }
  }
  const AdpDims dims{traj.front().x.size(), traj.front().u.size()};
  RegressorAccumulator acc(dims);
  std::vector<RegressorPair> out;
  out.reserve(breakpoints.size() - 1);
  acc.start(traj[breakpoints.front()]);
  for (std::size_t b = 1; b < breakpoints.size(); ++b) {
    for (std::size_t s = breakpoints[b - 1] + 1; s <= breakpoints[b]; ++s) acc.add(traj[s]);
    out.push_back(acc.cut());
  }
  return out;
}

RlsState RlsState::initial(AdpDims dims, double lambda_init) {
  if (!(lambda_init > 0.0)) throw Error("RlsState: lambda must be positive");
  return RlsState{SymMatrix::identity(dims.q()) * (1.0 / lambda_init),
                  Matrix::Zero(dims.q(), dims.p()), lambda_init};
}

void rls_update(RlsState& state, const RegressorPair& pair) {
  if (pair.psi.size() != state.M.rows() || pair.phi.size() != state.M.cols()) {
    throw DimensionError("rls_update: regressor dimensions do not match the state");
  }
  const Vector s = state.Sigma.dense() * pair.psi;
  const double denom = 1.0 + pair.psi.dot(s);
  state.Sigma = SymMatrix(state.Sigma.dense() - (s * s.transpose()) / denom);
  const Vector g = state.Sigma.dense() * pair.psi;
  const Eigen::RowVectorXd innovation = pair.phi.transpose() - pair.psi.transpose() * state.M;
  state.M.noalias() += g * innovation;
}

RlsState rls_step(const RlsState& state, const RegressorPair& pair) {
  RlsState next = state;
  rls_update(next, pair);
  return next;
}

Matrix rls_batch(std::span<const RegressorPair> pairs, double lambda_init) {
  if (pairs.empty()) throw Error("rls_batch: no data");
  const Index q = pairs.front().psi.size();
  const Index p = pairs.front().phi.size();
  Matrix gram = lambda_init * Matrix::Identity(q, q);
  Matrix cross = Matrix::Zero(q, p);
  for (const auto& pr : pairs) {
    gram.noalias() += pr.psi * pr.psi.transpose();
    cross.noalias() += pr.psi * pr.phi.transpose();
  }
  return gram.ldlt().solve(cross);
}

PeReport check_pe(std::span<const RegressorPair> pairs, double alpha) {
  if (pairs.empty()) throw Error("check_pe: need at least one pair");
  const Index q = pairs.front().psi.size();
  Matrix gram = Matrix::Zero(q, q);
  for (const auto& pr : pairs) gram.noalias() += pr.psi * pr.psi.transpose();
  gram /= static_cast<double>(pairs.size());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  return PeReport{lmin > alpha, lmin};
}

Vector block_theta(const Matrix& a, const Matrix& b, const SymMatrix& p) {
  const Index n = a.rows();
  const Index m = b.cols();
  const Matrix& pd = p.dense();
  Matrix big = Matrix::Zero(n + m, n + m);
  big.topLeftCorner(n, n) = pd * a + a.transpose() * pd;
  big.topRightCorner(n, m) = pd * b;
  big.bottomLeftCorner(m, n) = b.transpose() * pd;
  return vecs(SymMatrix(big));
}

Vector compact_theta(const Matrix& a, const Matrix& b, const SymMatrix& p) {
  const Index n = a.rows();
  const Index m = b.cols();
  const AdpDims dims{n, m};
  Vector out(dims.q_theta());
  out << vecs(SymMatrix(p.dense() * a + a.transpose() * p.dense())),
      ves(b.transpose() * p.dense());
  return out;
}

Vector compact_from_block(const Vector& theta_full, AdpDims dims) {
  if (theta_full.size() != dims.q()) throw DimensionError("compact_from_block: length mismatch");
  const Index n = dims.n;
  const Index m = dims.m;
  const Index big_n = n + m;
  Vector out(dims.q_theta());
  Index c = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) out(c++) = theta_full(upper_index(i, j, big_n));
  }
  // ves(B^T P): column `col` of B^T P is row `col` of P B.
  for (Index col = 0; col < n; ++col) {
    for (Index row = 0; row < m; ++row) out(c++) = theta_full(upper_index(col, n + row, big_n));
  }
  return out;
}

Matrix exact_theta_map(const Matrix& a, const Matrix& b) {
  const AdpDims dims{a.rows(), b.cols()};
  Matrix map(dims.q(), dims.p());
  for (Index c = 0; c < dims.p(); ++c) {
    map.col(c) = block_theta(a, b, unvecs(Vector::Unit(dims.p(), c)));
  }
  return map;
}

ModelTerms extract_model_terms(const Vector& theta_compact, AdpDims dims, const CostWeights& cost) {
  if (theta_compact.size() != dims.q_theta()) {
    throw DimensionError("extract_model_terms: theta has length " +
                         std::to_string(theta_compact.size()) + ", expected " +
                         std::to_string(dims.q_theta()));
  }
  if (cost.R().dim() != dims.m) throw DimensionError("extract_model_terms: R has the wrong size");
  SymMatrix ap = unvecs(theta_compact.head(dims.p()));
  const Eigen::Map<const Matrix> btp(theta_compact.data() + dims.p(), dims.m, dims.n);
  return ModelTerms{std::move(ap), cost.R_inv() * btp};
}

SymMatrix model_free_half_step(const SymMatrix& p, double h, const ModelTerms& terms,
                               const CostWeights& cost) {
  Matrix rate = terms.ap_term.dense();
  rate.noalias() -= terms.k_term.transpose() * cost.R().dense() * terms.k_term;
  rate += cost.Q().dense();
  return p + h * SymMatrix(rate);
}

AdpRun adp_vi_run(const RegressorSource& source, AdpDims dims, const CostWeights& cost,
                  const ViConfig& cfg, const AdpOptions& opts) {
  if (cfg.P0.dim() != dims.n) throw DimensionError("adp_vi_run: P0 has the wrong size");
  if (!is_pd(cost.Q())) throw Error("adp_vi_run: requires Q > 0");
  if (cost.R().dim() != dims.m) throw DimensionError("adp_vi_run: R has the wrong size");
  RlsState rls = RlsState::initial(dims, opts.lambda_init);
  if (opts.fixed_map) {
    if (opts.fixed_map->rows() != dims.q() || opts.fixed_map->cols() != dims.p()) {
      throw DimensionError("adp_vi_run: fixed map must be q x p");
    }
    rls.M = *opts.fixed_map;
  }
  std::vector<Matrix> m_trace;
  ViRun run = run_value_iteration(cfg, [&](std::size_t k, const SymMatrix& p, double h) {
    if (!opts.fixed_map) {
      std::optional<RegressorPair> pair = source(k);
      if (!pair) {
        throw TrajectoryExhaustedError("adp_vi_run: data exhausted at iteration " +
                                       std::to_string(k));
      }
      rls_update(rls, *pair);
    }
    if (opts.map_trace_stride != 0 && k % opts.map_trace_stride == 0) m_trace.push_back(rls.M);
    const Vector theta = compact_from_block(rls.M * vecs(p), dims);
    SymMatrix half = model_free_half_step(p, h, extract_model_terms(theta, dims, cost), cost);
    const double res = (half - p).norm() / h;
    return HalfStep{std::move(half), res};
  });
  return AdpRun{std::move(run), std::move(rls), std::move(m_trace)};
}

AdpRun adp_vi_run(std::span<const RegressorPair> pairs, AdpDims dims, const CostWeights& cost,
                  const ViConfig& cfg, const AdpOptions& opts) {
  return adp_vi_run(
      [pairs](std::size_t k) -> std::optional<RegressorPair> {
        if (k >= pairs.size()) return std::nullopt;
        return pairs[k];
      },
      dims, cost, cfg, opts);
}

NoisyModelRun noisy_model_vi(const LtiSystem& sys_true, const CostWeights& cost,
                             const ModelNoise& noise, const ViConfig& cfg, ModelNoiseMode mode,
                             std::uint64_t seed) {
  if (cfg.P0.dim() != sys_true.n()) throw DimensionError("noisy_model_vi: P0 has the wrong size");
  if (!is_pd(cost.Q())) throw Error("noisy_model_vi: requires Q > 0");
  cost.check_against(sys_true);
  for (const auto& d : noise.a_dirs) {
    if (d.rows() != sys_true.n() || d.cols() != sys_true.n()) {
      throw DimensionError("noisy_model_vi: A noise direction must be n x n");
    }
  }
  for (const auto& d : noise.b_dirs) {
    if (d.rows() != sys_true.n() || d.cols() != sys_true.m()) {
      throw DimensionError("noisy_model_vi: B noise direction must be n x m");
    }
  }

  // Reuse the operator's gain so that sigma = 0 is bitwise vi_run.
  const RiccatiOperator nominal(sys_true, cost);
  const bool b_noisy = !noise.b_dirs.empty();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a_used = sys_true.A();
  Matrix b_used = sys_true.B();
  Matrix a_avg = sys_true.A();
  Matrix b_avg = sys_true.B();

  ViRun run = run_value_iteration(cfg, [&](std::size_t k, const SymMatrix& p, double h) {
    Matrix a_hat = sys_true.A();
    for (const auto& d : noise.a_dirs) a_hat += (noise.sigma * normal(rng)) * d;
    Matrix b_hat = sys_true.B();
    for (const auto& d : noise.b_dirs) b_hat += (noise.sigma * normal(rng)) * d;
    if (mode == ModelNoiseMode::time_averaged) {
      const double w = 1.0 / static_cast<double>(k + 1);
      a_avg += w * (a_hat - a_avg);
      b_avg += w * (b_hat - b_avg);
      a_used = a_avg;
      b_used = b_avg;
    } else {
      a_used = std::move(a_hat);
      b_used = std::move(b_hat);
    }
    const Matrix g = b_noisy ? SymMatrix(b_used * cost.R_inv() * b_used.transpose()).dense()
                             : nominal.G();
    SymMatrix half = p + h * riccati_rhs(a_used.transpose(), g, cost.Q(), p);
    const double res = (half - p).norm() / h;
    return HalfStep{std::move(half), res};
  });
  return NoisyModelRun{std::move(run), std::move(a_used), std::move(b_used)};
}

}  // namespace robust_dp
