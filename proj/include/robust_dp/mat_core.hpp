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

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace robust_dp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A linear system that the solver could not factor (e.g. a Lyapunov
/// equation whose Kronecker operator has a zero eigenvalue).
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Real symmetric n-by-n matrix.
///
/// Symmetry holds exactly: every constructor symmetrizes its input as
/// (M + M^T) / 2, and the arithmetic operators below only combine entries
/// elementwise, which keeps the mirror entries bit-identical.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& m);

  static SymMatrix zero(Index n);
  static SymMatrix identity(Index n);
  static SymMatrix diagonal(const Vector& d);

  Index dim() const { return m_.rows(); }
  double operator()(Index i, Index j) const { return m_(i, j); }
  const Matrix& dense() const { return m_; }

  /// Frobenius norm. All tolerances in the library are stated in it.
  double norm() const { return m_.norm(); }
  bool all_finite() const { return m_.allFinite(); }

  SymMatrix& operator+=(const SymMatrix& o);
  SymMatrix& operator-=(const SymMatrix& o);
  SymMatrix& operator*=(double s);

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  SymMatrix operator-() const;

  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  struct Trusted {};
  SymMatrix(Matrix m, Trusted) : m_(std::move(m)) {}

  Matrix m_;
};

constexpr std::size_t tri_size(std::size_t n) { return n * (n + 1) / 2; }

/// Row-major upper triangle: [M11, M12, ..., M1n, M22, ..., Mnn].
Vector vecs(const SymMatrix& m);

/// Inverse of vecs. Throws DimensionError when the length is not n(n+1)/2.
SymMatrix unvecs(const Vector& v);

/// Column-stacked vectorization of a rectangular matrix.
Vector ves(const Matrix& m);

Matrix kron(const Matrix& a, const Matrix& b);

/// A (+) C = A (x) I + I (x) C for square A, C of equal size.
Matrix kron_sum(const Matrix& a, const Matrix& c);

/// vecs with off-diagonal entries scaled by sqrt(2); the Euclidean norm of
/// the result equals the Frobenius norm of the input.
Vector sym_isometry(const SymMatrix& m);

/// Quadratic monomials [x1^2, 2 x1 x2, ..., 2 x1 xq, x2^2, ..., xq^2] so
/// that dot(bar_vec(x), vecs(P)) == x^T P x.
Vector bar_vec(const Vector& xi);

/// Solves A^T X + X A + W = 0 through the Kronecker-sum system
/// (A^T (+) A^T) ves(X) = -ves(W) with partial-pivot LU.
/// Throws SingularSystemError when A has eigenvalue pairs summing to zero.
SymMatrix solve_lyapunov(const Matrix& a, const SymMatrix& w);

/// Pivot floor used by is_pd: 1e-10 * max(1, ||M||_F).
double pd_tolerance(const SymMatrix& m);

/// Numerical positive definiteness by Cholesky with pivot floor
/// pd_tolerance(m). Non-finite input is never PD.
bool is_pd(const SymMatrix& m);

/// Stability test: solve A^T X + X A + I = 0 and check X is PD.
bool is_hurwitz(const Matrix& a);

}  // namespace robust_dp
