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

#include "robust_dp/mat_core.hpp"

#include <algorithm>
#include <cmath>

namespace robust_dp {

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw DimensionError("SymMatrix requires a non-empty square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  m_ = (m + m.transpose()) * 0.5;
}

SymMatrix SymMatrix::zero(Index n) { return SymMatrix(Matrix::Zero(n, n), Trusted{}); }

SymMatrix SymMatrix::identity(Index n) { return SymMatrix(Matrix::Identity(n, n), Trusted{}); }

SymMatrix SymMatrix::diagonal(const Vector& d) {
  return SymMatrix(Matrix(d.asDiagonal()), Trusted{});
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
  if (o.dim() != dim()) throw DimensionError("SymMatrix sum: dimension mismatch");
  m_ += o.m_;
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& o) {
  if (o.dim() != dim()) throw DimensionError("SymMatrix difference: dimension mismatch");
  m_ -= o.m_;
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  m_ *= s;
  return *this;
}

SymMatrix SymMatrix::operator-() const { return SymMatrix(-m_, Trusted{}); }

Vector vecs(const SymMatrix& m) {
  const Index n = m.dim();
  Vector v(static_cast<Index>(tri_size(static_cast<std::size_t>(n))));
  Index c = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) v(c++) = m(i, j);
  }
  return v;
}

SymMatrix unvecs(const Vector& v) {
  const auto len = static_cast<std::size_t>(v.size());
  std::size_t n = 0;
  while (tri_size(n) < len) ++n;
  if (n == 0 || tri_size(n) != len) {
    throw DimensionError("unvecs: length " + std::to_string(len) + " is not triangular");
  }
  Matrix m(n, n);
  Index c = 0;
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    for (Index j = i; j < static_cast<Index>(n); ++j) {
      m(i, j) = v(c);
      m(j, i) = v(c);
      ++c;
    }
  }
  return SymMatrix(m);
}

Vector ves(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix kron_sum(const Matrix& a, const Matrix& c) {
  if (a.rows() != a.cols() || c.rows() != c.cols() || a.rows() != c.rows()) {
    throw DimensionError("kron_sum: operands must be square and of equal size");
  }
  const Index n = a.rows();
  const Matrix eye = Matrix::Identity(n, n);
  return kron(a, eye) + kron(eye, c);
}

Vector sym_isometry(const SymMatrix& m) {
  const Index n = m.dim();
  const double root2 = std::sqrt(2.0);
  Vector v(static_cast<Index>(tri_size(static_cast<std::size_t>(n))));
  Index c = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) v(c++) = (i == j) ? m(i, j) : root2 * m(i, j);
  }
  return v;
}

Vector bar_vec(const Vector& xi) {
  const Index q = xi.size();
  if (q < 1) throw DimensionError("bar_vec: empty vector");
  Vector v(static_cast<Index>(tri_size(static_cast<std::size_t>(q))));
  Index c = 0;
  for (Index i = 0; i < q; ++i) {
    v(c++) = xi(i) * xi(i);
    for (Index j = i + 1; j < q; ++j) v(c++) = 2.0 * xi(i) * xi(j);
  }
  return v;
}

SymMatrix solve_lyapunov(const Matrix& a, const SymMatrix& w) {
  if (a.rows() != a.cols() || a.rows() != w.dim()) {
    throw DimensionError("solve_lyapunov: A and W must be square of equal size");
  }
  const Index n = a.rows();
  const Matrix at = a.transpose();
  const Matrix op = kron_sum(at, at);
  Eigen::PartialPivLU<Matrix> lu(op);
  // rcond is an estimate and misses exact zero pivots; check both.
  const Vector pivots = lu.matrixLU().diagonal().cwiseAbs();
  if (!(lu.rcond() > 1e-14) || !(pivots.minCoeff() > 1e-14 * pivots.maxCoeff())) {
    throw SingularSystemError("solve_lyapunov: A (+) A is singular to working precision");
  }
  const Vector rhs = -ves(w.dense());
  const Vector x = lu.solve(rhs);
  if (!x.allFinite()) throw SingularSystemError("solve_lyapunov: non-finite solution");
  return SymMatrix(Eigen::Map<const Matrix>(x.data(), n, n));
}

double pd_tolerance(const SymMatrix& m) { return 1e-10 * std::max(1.0, m.norm()); }

bool is_pd(const SymMatrix& m) {
  if (!m.all_finite()) return false;
  const Index n = m.dim();
  const double tol = pd_tolerance(m);
  // Dense Cholesky; n is small so a fixed-size scratch would not buy much.
  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = m(j, j);
    for (Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol)) return false;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return true;
}

bool is_hurwitz(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() < 1) return false;
  try {
    return is_pd(solve_lyapunov(a, SymMatrix::identity(a.rows())));
  } catch (const SingularSystemError&) {
    return false;
  }
}

}  // namespace robust_dp
