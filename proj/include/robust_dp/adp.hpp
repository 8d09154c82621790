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

// Data-driven value iteration. The Riccati right-hand side is rebuilt from
// theta(P) = vecs([[PA + A^T P, PB], [B^T P, 0]]), which the recursive
// least-squares map M_k learns from state/input data:
//
//   psi_j^T theta(P) = phi_j^T vecs(P),
//   phi_j = xbar(t_{j+1}) - xbar(t_j),  psi_j = int_{t_j}^{t_{j+1}} zbar dt,
//
// with z = [x; u] and xbar = bar_vec(x).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "robust_dp/robust_vi.hpp"

namespace robust_dp {

class TrajectoryExhaustedError : public Error {
 public:
  using Error::Error;
};

struct TrajectorySample {
  double t;
  Vector x;
  Vector u;
};

struct RegressorPair {
  Vector phi;  // length n(n+1)/2
  Vector psi;  // length (n+m)(n+m+1)/2
};

/// Lengths of the regression quantities for an n-state, m-input plant.
struct AdpDims {
  Index n;
  Index m;
  Index p() const { return static_cast<Index>(tri_size(static_cast<std::size_t>(n))); }
  Index q() const { return static_cast<Index>(tri_size(static_cast<std::size_t>(n + m))); }
  Index q_theta() const { return p() + n * m; }
};

/// Streaming version of build_regressors: feed samples, cut at breakpoints.
class RegressorAccumulator {
 public:
  explicit RegressorAccumulator(AdpDims dims);

  /// Opens a new interval at `s`.
  void start(const TrajectorySample& s);
  /// Extends the open interval to `s` (trapezoid on zbar).
  void add(const TrajectorySample& s);
  /// Closes the interval at the last added sample and reopens there.
  RegressorPair cut();

  bool open() const { return open_; }

 private:
  AdpDims dims_;
  bool open_ = false;
  double t_last_ = 0.0;
  Vector zbar_last_;
  Vector xbar_start_;
  Vector xbar_last_;
  Vector psi_;
};

/// One pair per consecutive breakpoint interval of a stored trajectory.
std::vector<RegressorPair> build_regressors(std::span<const TrajectorySample> traj,
                                            std::span<const std::size_t> breakpoints);

struct RlsState {
  SymMatrix Sigma;  // q x q
  Matrix M;         // q x p, theta_k = M vecs(P)
  double lambda_init;

  static RlsState initial(AdpDims dims, double lambda_init = 1.0);
};

/// Sigma_k = Sigma - Sigma psi psi^T Sigma / (1 + psi^T Sigma psi),
/// M_k = M + Sigma_k psi (phi^T - psi^T M).
RlsState rls_step(const RlsState& state, const RegressorPair& pair);
void rls_update(RlsState& state, const RegressorPair& pair);

/// Closed form of l recursive steps: (sum psi psi^T + lambda I)^-1 sum psi phi^T.
Matrix rls_batch(std::span<const RegressorPair> pairs, double lambda_init);

struct PeReport {
  bool satisfied;
  double min_eigenvalue;
};

/// lambda_min((1/l) sum psi_j psi_j^T) > alpha.
PeReport check_pe(std::span<const RegressorPair> pairs, double alpha);

/// theta(P) in the full block layout (length q).
Vector block_theta(const Matrix& a, const Matrix& b, const SymMatrix& p);

/// [vecs(PA + A^T P); ves(B^T P)] (length q_theta).
Vector compact_theta(const Matrix& a, const Matrix& b, const SymMatrix& p);

/// Drops the input-input block of a full theta and reorders to compact form.
Vector compact_from_block(const Vector& theta_full, AdpDims dims);

/// The true q x p map with block_theta(A, B, P) = map * vecs(P).
Matrix exact_theta_map(const Matrix& a, const Matrix& b);

struct ModelTerms {
  SymMatrix ap_term;  // A^T P + P A
  Matrix k_term;      // R^-1 B^T P
};

/// Unpacks a compact theta. Throws DimensionError on a length mismatch.
ModelTerms extract_model_terms(const Vector& theta_compact, AdpDims dims, const CostWeights& cost);

/// P + h (T_A - T_B^T R T_B + Q).
SymMatrix model_free_half_step(const SymMatrix& p, double h, const ModelTerms& terms,
                               const CostWeights& cost);

/// Supplies the regressor pair for iteration k, or nullopt when the data ran out.
using RegressorSource = std::function<std::optional<RegressorPair>(std::size_t k)>;

struct AdpOptions {
  double lambda_init = 1.0;
  /// Skip learning and use this q x p map throughout.
  std::optional<Matrix> fixed_map{};
  /// Keep M_k every this many iterations; 0 keeps none.
  std::size_t map_trace_stride = 0;
};

struct AdpRun {
  ViRun run;
  RlsState rls;
  std::vector<Matrix> M_trace;
};

/// Interleaves one RLS step per iteration with the value-iteration update
/// built from theta_k = M_k vecs(P_k). Requires Q > 0. Throws
/// TrajectoryExhaustedError when the source runs dry before termination.
AdpRun adp_vi_run(const RegressorSource& source, AdpDims dims, const CostWeights& cost,
                  const ViConfig& cfg, const AdpOptions& opts = {});

AdpRun adp_vi_run(std::span<const RegressorPair> pairs, AdpDims dims, const CostWeights& cost,
                  const ViConfig& cfg, const AdpOptions& opts = {});

enum class ModelNoiseMode { instantaneous, time_averaged };

struct ModelNoise {
  std::vector<Matrix> a_dirs;  // Delta_i, n x n
  std::vector<Matrix> b_dirs;  // optional directions for B, n x m
  double sigma = 0.0;
};

struct NoisyModelRun {
  ViRun run;
  Matrix A_used;  // model used at the last iteration
  Matrix B_used;
};

/// Value iteration on A_k = A + sigma sum Delta_i v_i(k) (and likewise for B
/// when b_dirs is non-empty), v_i(k) iid N(0, 1). time_averaged replaces the
/// sample by its running mean.
NoisyModelRun noisy_model_vi(const LtiSystem& sys_true, const CostWeights& cost,
                             const ModelNoise& noise, const ViConfig& cfg, ModelNoiseMode mode,
                             std::uint64_t seed);

}  // namespace robust_dp
