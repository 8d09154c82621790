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

#include "robust_dp/decentralized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

namespace robust_dp {

SymMatrix coupling_nzs(const SymMatrix& p_i, const SymMatrix& p_j, const Matrix& b_j,
                       const SymMatrix& r_j, const SymMatrix& r_ij) {
  const Index n = p_i.dim();
  if (p_j.dim() != n || b_j.rows() != n || r_j.dim() != b_j.cols() || r_ij.dim() != r_j.dim()) {
    throw DimensionError("coupling_nzs: inconsistent dimensions");
  }
  if (!is_pd(r_j) || !is_pd(r_ij)) throw Error("coupling_nzs: R_j and R_ij must be positive definite");
  const Index m = r_j.dim();
  const Matrix r_inv = r_j.dense().llt().solve(Matrix::Identity(m, m));
  const Matrix gain = r_inv * b_j.transpose();  // R_j^-1 B_j^T
  const SymMatrix s(b_j * gain);
  const SymMatrix t(gain.transpose() * r_ij.dense() * gain);
  const Matrix cross = p_j.dense() * s.dense() * p_i.dense();
  return SymMatrix(p_j.dense() * t.dense() * p_j.dense() - cross - cross.transpose());
}

SymMatrix coupling_unmatched(const SymMatrix& p_2, const SymMatrix& p_1, const Matrix& b_1,
                             const SymMatrix& r_1) {
  if (b_1.rows() != p_1.dim() || r_1.dim() != b_1.cols()) {
    throw DimensionError("coupling_unmatched: B_1 must be n_1 x m_1 and R_1 m_1 x m_1");
  }
  const Index m = r_1.dim();
  const Matrix r_inv = r_1.dense().llt().solve(Matrix::Identity(m, m));
  const Matrix btpb = b_1.transpose() * p_1.dense() * b_1;
  if (m == 1) {
    const double c = r_inv(0, 0) * btpb(0, 0);
    return SymMatrix((2.0 * c) * p_2.dense());
  }
  if (m != p_2.dim()) throw DimensionError("coupling_unmatched: B_1^T P_1 B_1 does not conform to P_2");
  return SymMatrix(p_2.dense() * r_inv * btpb + btpb * r_inv * p_2.dense());
}

void Network::validate() const {
  if (nodes.empty()) throw Error("Network: no nodes");
  if (coupling.size() != nodes.size()) throw DimensionError("Network: one coupling per node");
  for (const auto& node : nodes) node.cost.check_against(node.plant);
}

Network CoupledProblem::as_network() const {
  Network net{{sub[0], sub[1]}, {}};
  for (std::size_t i = 0; i < 2; ++i) {
    if (!coupling[i]) {
      net.coupling.emplace_back();
      continue;
    }
    net.coupling.emplace_back([c = coupling[i], i](std::span<const SymMatrix> p) {
      return c(p[i], p[1 - i]);
    });
  }
  return net;
}

bool NetworkRun::all_converged() const {
  return std::all_of(nodes.begin(), nodes.end(),
                     [](const ViRun& r) { return r.terminated == Termination::converged; });
}

StepSchedule default_node_schedule() { return power_step_schedule(0.05, 0.6); }

namespace {

struct Attempt {
  NetworkRun run;
  bool diverged;
};

Attempt network_attempt(const Network& net, std::span<const ViConfig> configs,
                        const std::vector<RiccatiOperator>& ops, const std::vector<double>& radius,
                        double scale) {
  const std::size_t count = net.nodes.size();
  std::vector<SymMatrix> p;
  NetworkRun out;
  for (std::size_t i = 0; i < count; ++i) {
    p.push_back(configs[i].P0);
    out.nodes.push_back(ViRun{.trace = {}, .restarts = 0, .terminated = Termination::max_iters,
                              .final = configs[i].P0, .iterations = 0});
  }
  std::vector<bool> active(count);
  for (std::size_t i = 0; i < count; ++i) active[i] = configs[i].max_iters > 0;

  std::vector<std::optional<SymMatrix>> next(count);
  std::size_t k = 0;
  for (; std::any_of(active.begin(), active.end(), [](bool a) { return a; }); ++k) {
    // Every proposal reads the same snapshot of P; updates land afterwards.
    for (std::size_t i = 0; i < count; ++i) {
      next[i].reset();
      if (!active[i]) continue;
      const ViConfig& cfg = configs[i];
      const double h = scale * cfg.step(k);
      if (!(h > 0.0)) throw Error("network_vi_run: step size must be positive");
      SymMatrix rate = ops[i](p[i]);
      if (net.coupling[i]) rate += net.coupling[i](p);
      SymMatrix half = p[i] + h * rate;
      const double res = (half - p[i]).norm() / h;
      if (cfg.trace_stride != 0 && k % cfg.trace_stride == 0) {
        out.nodes[i].trace.push_back(TraceEntry{k, 0, h, p[i], res});
      }
      if (is_pd(half) && res < cfg.eps_bar) {
        out.nodes[i].terminated = Termination::converged;
        out.nodes[i].iterations = k;
        out.nodes[i].final = p[i];
        active[i] = false;
        continue;
      }
      if (!half.all_finite() || half.norm() > radius[i]) {
        out.nodes[i].terminated = Termination::diverged;
        out.nodes[i].iterations = k + 1;
        out.nodes[i].final = p[i];
        out.iterations = k + 1;
        return Attempt{std::move(out), true};
      }
      next[i] = std::move(half);
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (!next[i]) continue;
      p[i] = std::move(*next[i]);
      if (k + 1 >= configs[i].max_iters) {
        out.nodes[i].terminated = Termination::max_iters;
        out.nodes[i].iterations = k + 1;
        out.nodes[i].final = p[i];
        active[i] = false;
      }
    }
  }
  out.iterations = k;
  return Attempt{std::move(out), false};
}

}  // namespace

NetworkRun network_vi_run(const Network& net, std::span<const ViConfig> configs,
                          const NetworkOptions& opts) {
  net.validate();
  if (configs.size() != net.nodes.size()) throw DimensionError("network_vi_run: one config per node");
  std::vector<RiccatiOperator> ops;
  std::vector<double> radius;
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    if (configs[i].P0.dim() != net.nodes[i].plant.n()) {
      throw DimensionError("network_vi_run: P0 of node " + std::to_string(i) + " has the wrong size");
    }
    ops.emplace_back(net.nodes[i].plant, net.nodes[i].cost);
    radius.push_back(opts.safety_radius.value_or(100.0 * (1.0 + configs[i].P0.norm())));
  }
  Attempt first = network_attempt(net, configs, ops, radius, 1.0);
  if (!first.diverged || !opts.halve_on_divergence) return std::move(first.run);
  Attempt second = network_attempt(net, configs, ops, radius, 0.5);
  second.run.step_halved = true;
  return std::move(second.run);
}

NetworkRun decentralized_vi_run(const CoupledProblem& prob, const std::array<ViConfig, 2>& configs,
                                const NetworkOptions& opts) {
  return network_vi_run(prob.as_network(), configs, opts);
}

std::vector<double> coupled_residuals(const Network& net, std::span<const SymMatrix> p) {
  net.validate();
  if (p.size() != net.nodes.size()) throw DimensionError("coupled_residuals: one P per node");
  std::vector<double> out;
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    SymMatrix r = RiccatiOperator(net.nodes[i].plant, net.nodes[i].cost)(p[i]);
    if (net.coupling[i]) r += net.coupling[i](p);
    out.push_back(r.norm());
  }
  return out;
}

namespace {

// Node i's equation with the other nodes frozen:
// F(X) = Riccati_i(X) + Delta_i(P with P_i = X).
SymMatrix node_equation(const Network& net, std::size_t i, const RiccatiOperator& op,
                        std::vector<SymMatrix>& p, const SymMatrix& x) {
  const SymMatrix saved = p[i];
  p[i] = x;
  SymMatrix f = op(x);
  if (net.coupling[i]) f += net.coupling[i](p);
  p[i] = saved;
  return f;
}

// Newton's method on the node equation. Central differences with a unit
// probe are exact for maps of degree two in X, so with zero coupling this
// is the Kleinman iteration written on P instead of K.
SymMatrix newton_node_solve(const Network& net, std::size_t i, std::vector<SymMatrix>& p,
                            double tol) {
  const RiccatiOperator op(net.nodes[i].plant, net.nodes[i].cost);
  const Index n = p[i].dim();
  const auto t = static_cast<Index>(tri_size(static_cast<std::size_t>(n)));
  SymMatrix x = p[i];
  double scale = 1.0 + x.norm();
  for (int it = 0; it < 100; ++it) {
    const SymMatrix f = node_equation(net, i, op, p, x);
    if (!f.all_finite()) break;
    if (f.norm() <= tol * scale) return x;
    Matrix jac(t, t);
    for (Index c = 0; c < t; ++c) {
      const SymMatrix e = unvecs(Vector::Unit(t, c)) * scale;
      jac.col(c) = (vecs(node_equation(net, i, op, p, x + e)) -
                    vecs(node_equation(net, i, op, p, x - e))) /
                   (2.0 * scale);
    }
    const Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible()) throw SingularSystemError("node Newton step: singular Jacobian");
    const SymMatrix step = unvecs(lu.solve(vecs(f)));
    x = x - step;
    if (step.norm() <= 1e-14 * scale) return x;
    scale = 1.0 + x.norm();
  }
  throw NoConvergenceError("node Newton solve did not converge");
}

}  // namespace

CoupledSolution solve_coupled_oracle(const Network& net, const CoupledOracleOptions& opts) {
  net.validate();
  const std::size_t count = net.nodes.size();
  if (!opts.k0.empty() && opts.k0.size() != count) {
    throw DimensionError("solve_coupled_oracle: one initial gain per node");
  }
  std::vector<SymMatrix> p;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& node = net.nodes[i];
    const Matrix k0 = opts.k0.empty() ? Matrix::Zero(node.plant.m(), node.plant.n()) : opts.k0[i];
    p.push_back(solve_are_kleinman(node.plant, node.cost, k0).P_star);
  }
  double previous = std::numeric_limits<double>::infinity();
  int worse = 0;
  for (std::size_t sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        p[i] = newton_node_solve(net, i, p, 0.01 * opts.tol);
      } catch (const Error& e) {
        throw NoConvergenceError(std::string("solve_coupled_oracle: node solve failed: ") + e.what());
      }
    }
    std::vector<double> res = coupled_residuals(net, p);
    const double worst = *std::max_element(res.begin(), res.end());
    if (!std::isfinite(worst)) throw NoConvergenceError("solve_coupled_oracle: non-finite residual");
    if (worst <= opts.tol) return CoupledSolution{std::move(p), std::move(res), sweep};
    worse = worst >= previous ? worse + 1 : 0;
    if (worse >= 5) {
      throw NoConvergenceError("solve_coupled_oracle: alternation does not contract (residual " +
                               std::to_string(worst) + ")");
    }
    previous = worst;
  }
  throw NoConvergenceError("solve_coupled_oracle: no convergence within " +
                           std::to_string(opts.max_sweeps) + " sweeps");
}

Vector nnls(const Matrix& a, const Vector& b, std::size_t max_iterations) {
  if (a.rows() != b.size()) throw DimensionError("nnls: A and b disagree in rows");
  const Index n = a.cols();
  if (max_iterations == 0) max_iterations = static_cast<std::size_t>(3 * n + 10);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                     a.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(a.rows(), n));
  Vector x = Vector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);

  auto solve_passive = [&]() {
    std::vector<Index> cols;
    for (Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    }
    Matrix sub(a.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Index>(c)) = a.col(cols[c]);
    const Vector zs = sub.colPivHouseholderQr().solve(b);
    Vector z = Vector::Zero(n);
    for (std::size_t c = 0; c < cols.size(); ++c) z(cols[c]) = zs(static_cast<Index>(c));
    return z;
  };

  for (std::size_t outer = 0; outer < max_iterations; ++outer) {
    const Vector w = a.transpose() * (b - a * x);
    Index t = -1;
    double best = tol;
    for (Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best) {
        best = w(j);
        t = j;
      }
    }
    if (t < 0) break;
    passive[static_cast<std::size_t>(t)] = true;
    Vector z = solve_passive();
    for (std::size_t inner = 0; inner < max_iterations; ++inner) {
      double alpha = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          alpha = std::min(alpha, x(j) / (x(j) - z(j)));
        }
      }
      if (!std::isfinite(alpha)) break;
      x += alpha * (z - x);
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
      z = solve_passive();
    }
    x = z;
  }
  return x;
}

GainBoundReport gain_bound_report(const CoupledProblem& prob,
                                  const std::array<SymMatrix, 2>& center,
                                  std::span<const std::array<SymMatrix, 2>> samples) {
  GainBoundReport report;
  report.bound_scale = {1.0, 1.0};
  if (samples.empty()) return report;
  const auto rows = static_cast<Index>(samples.size());
  Matrix design(rows, 6);
  std::array<Vector, 2> target{Vector::Zero(rows), Vector::Zero(rows)};
  std::array<SymMatrix, 2> delta_center{SymMatrix::zero(center[0].dim()),
                                        SymMatrix::zero(center[1].dim())};
  for (std::size_t i = 0; i < 2; ++i) {
    if (prob.coupling[i]) delta_center[i] = prob.coupling[i](center[i], center[1 - i]);
  }
  for (Index r = 0; r < rows; ++r) {
    const auto& s = samples[static_cast<std::size_t>(r)];
    const std::array<double, 2> dist{(s[0] - center[0]).norm(), (s[1] - center[1]).norm()};
    for (std::size_t j = 0; j < 2; ++j) {
      for (int d = 1; d <= 3; ++d) design(r, static_cast<Index>(3 * j) + d - 1) = std::pow(dist[j], d);
    }
    for (std::size_t i = 0; i < 2; ++i) {
      if (prob.coupling[i]) {
        target[i](r) = (prob.coupling[i](s[i], s[1 - i]) - delta_center[i]).norm();
      }
    }
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const Vector x = nnls(design, target[i]);
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t d = 0; d < 3; ++d) report.coefficients[i][j][d] = x(static_cast<Index>(3 * j + d));
    }
    const Vector fit = design * x;
    double scale = 0.0;
    bool any = false;
    for (Index r = 0; r < rows; ++r) {
      if (fit(r) > 0.0) {
        scale = std::max(scale, target[i](r) / fit(r));
        any = true;
      } else if (target[i](r) > 0.0) {
        scale = std::numeric_limits<double>::infinity();
        any = true;
      }
    }
    report.bound_scale[i] = any ? scale : 1.0;
  }
  return report;
}

}  // namespace robust_dp
