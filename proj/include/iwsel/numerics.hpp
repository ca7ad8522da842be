// SPDX-License-Identifier: Apache-2.0
//
// Small dense complex linear algebra for N <= 8 receive antennas: Hermitian
// matrices, Cholesky factorization, lower-triangular inversion and the
// whitening product. Every kernel reports its arithmetic through an
// OpCounter so the cost of the full and diagonal whitening paths can be
// compared directly.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "iwsel/error.hpp"

namespace iwsel {

using cplx = std::complex<double>;

/// Arithmetic-event tally. Kernels add to it; callers own it. Complex-by-
/// real products and squared magnitudes are booked as real operations.
struct OpCounter {
  std::uint64_t complex_mults = 0;
  std::uint64_t complex_adds = 0;
  std::uint64_t real_mults = 0;
  std::uint64_t real_adds = 0;
  std::uint64_t divisions = 0;
  std::uint64_t sqrts = 0;

  std::uint64_t total() const { return complex_mults + complex_adds + real_mults + real_adds + divisions + sqrts; }

  /// Real floating-point operations: a complex multiply is 4 mults + 2 adds,
  /// a complex add is 2 adds.
  std::uint64_t flops() const {
    return 6 * complex_mults + 2 * complex_adds + real_mults + real_adds + divisions + sqrts;
  }

  OpCounter& operator+=(const OpCounter& o) {
    complex_mults += o.complex_mults;
    complex_adds += o.complex_adds;
    real_mults += o.real_mults;
    real_adds += o.real_adds;
    divisions += o.divisions;
    sqrts += o.sqrts;
    return *this;
  }
};

inline OpCounter operator+(OpCounter a, const OpCounter& b) { return a += b; }

/// Dense row-major complex matrix.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_)
      throw Error(Errc::dimension_mismatch, "entry count does not match " + std::to_string(rows_) +
                                                "x" + std::to_string(cols_));
  }
  ComplexMatrix(std::size_t rows, std::size_t cols, std::initializer_list<cplx> entries)
      : ComplexMatrix(rows, cols, std::vector<cplx>(entries)) {}

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static ComplexMatrix diagonal(std::span<const double> values) {
    ComplexMatrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  ComplexMatrix adjoint() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& v : data_) s += std::norm(v);
    return std::sqrt(s);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
  }

  /// True when every off-diagonal entry is exactly zero.
  bool is_diagonal() const {
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c)
        if (r != c && (*this)(r, c) != cplx{}) return false;
    return true;
  }

  bool is_lower_triangular() const {
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = r + 1; c < cols_; ++c)
        if ((*this)(r, c) != cplx{}) return false;
    return true;
  }

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

inline ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) throw Error(Errc::dimension_mismatch, "matrix product");
  ComplexMatrix out(a.rows(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx s = a(r, k);
      for (std::size_t c = 0; c < b.cols(); ++c) out(r, c) += s * b(k, c);
    }
  return out;
}

inline ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(Errc::dimension_mismatch, "difference");
  ComplexMatrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

inline ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(Errc::dimension_mismatch, "sum");
  ComplexMatrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

/// Square matrix with A(i,j) == conj(A(j,i)) and a real, non-negative
/// diagonal. Construction symmetrizes to exact equality after validating the
/// input against a scale-relative tolerance.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(ComplexMatrix m) : m_(std::move(m)) {
    if (!m_.square()) throw Error(Errc::not_square, "Hermitian matrix must be square");
    if (!m_.all_finite()) throw Error(Errc::not_hermitian, "non-finite entry");
    double scale = 1.0;
    for (const auto& v : m_.data()) scale = std::max(scale, std::abs(v));
    const double tol = 1e-12 * scale;
    const std::size_t n = m_.rows();
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(m_(i, i).imag()) > tol || m_(i, i).real() < -tol)
        throw Error(Errc::not_hermitian, "diagonal must be real and non-negative");
      m_(i, i) = std::max(m_(i, i).real(), 0.0);
      for (std::size_t j = i + 1; j < n; ++j) {
        if (std::abs(m_(i, j) - std::conj(m_(j, i))) > tol)
          throw Error(Errc::not_hermitian, "A(i,j) != conj(A(j,i))");
        m_(j, i) = std::conj(m_(i, j));
      }
    }
  }

  static HermitianMatrix identity(std::size_t n) { return HermitianMatrix(ComplexMatrix::identity(n)); }
  static HermitianMatrix diagonal(std::span<const double> values) {
    return HermitianMatrix(ComplexMatrix::diagonal(values));
  }
  static HermitianMatrix diagonal(std::initializer_list<double> values) {
    return diagonal(std::span<const double>(values.begin(), values.size()));
  }

  std::size_t dim() const { return m_.rows(); }
  const cplx& operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  const ComplexMatrix& matrix() const { return m_; }
  bool is_diagonal() const { return m_.is_diagonal(); }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) t += m_(i, i).real();
    return t;
  }

  friend bool operator==(const HermitianMatrix&, const HermitianMatrix&) = default;

 private:
  ComplexMatrix m_;
};

/// Lower-triangular L with L·Lᴴ equal to the (possibly regularized) source.
struct CholeskyFactor {
  ComplexMatrix lower;
  bool is_diagonal = false;
  bool regularized = false;

  std::size_t dim() const { return lower.rows(); }
};

/// Diagonal loading applied when the plain factorization hits a pivot <= 0.
inline constexpr double kRegularization = 1e-9;

namespace detail {

inline bool factor_dense(const ComplexMatrix& r, ComplexMatrix& l, OpCounter& ops) {
  const std::size_t n = r.rows();
  l = ComplexMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = r(j, j).real();
    for (std::size_t k = 0; k < j; ++k) pivot -= std::norm(l(j, k));
    ops.real_mults += 2 * j;
    ops.real_adds += 2 * j;
    if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
    const double d = std::sqrt(pivot);
    const double inv = 1.0 / d;
    ++ops.sqrts;
    ++ops.divisions;
    l(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      cplx t = r(i, j);
      for (std::size_t k = 0; k < j; ++k) t -= l(i, k) * std::conj(l(j, k));
      ops.complex_mults += j;
      ops.complex_adds += j;
      ops.real_mults += 2;
      l(i, j) = t * inv;
    }
  }
  return true;
}

inline bool factor_diagonal(const ComplexMatrix& r, ComplexMatrix& l, OpCounter& ops) {
  const std::size_t n = r.rows();
  l = ComplexMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double pivot = r(j, j).real();
    if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
    l(j, j) = std::sqrt(pivot);
    ++ops.sqrts;
  }
  return true;
}

}  // namespace detail

/// Cholesky factorization R = L·Lᴴ. Diagonal inputs take an N-sqrt path.
/// When a pivot is not positive, the factorization is retried once on
/// R + ε·(trace(R)/N)·I.
inline CholeskyFactor cholesky(const HermitianMatrix& r, OpCounter& ops) {
  if (r.dim() == 0) throw Error(Errc::dimension_mismatch, "cholesky of empty matrix");
  CholeskyFactor f;
  f.is_diagonal = r.is_diagonal();
  auto attempt = [&](const ComplexMatrix& m) {
    return f.is_diagonal ? detail::factor_diagonal(m, f.lower, ops) : detail::factor_dense(m, f.lower, ops);
  };
  if (attempt(r.matrix())) return f;

  const double load = kRegularization * r.trace() / static_cast<double>(r.dim());
  if (!(load > 0.0)) throw Error(Errc::not_positive_definite, "zero-trace covariance cannot be regularized");
  ComplexMatrix loaded = r.matrix();
  for (std::size_t i = 0; i < r.dim(); ++i) loaded(i, i) += load;
  f.regularized = true;
  if (!attempt(loaded)) throw Error(Errc::not_positive_definite, "pivot <= 0 after regularization");
  return f;
}

/// L⁻¹ by forward substitution. The diagonal case costs exactly N divisions.
inline ComplexMatrix lower_inverse(const CholeskyFactor& f, OpCounter& ops) {
  const std::size_t n = f.dim();
  const ComplexMatrix& l = f.lower;
  ComplexMatrix x(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, i) = 1.0 / l(i, i).real();
    ++ops.divisions;
  }
  if (f.is_diagonal) return x;
  for (std::size_t i = 1; i < n; ++i) {
    const cplx inv_ii = x(i, i);
    for (std::size_t j = 0; j < i; ++j) {
      cplx s = l(i, j) * x(j, j);
      for (std::size_t k = j + 1; k < i; ++k) s += l(i, k) * x(k, j);
      ops.complex_mults += i - j - 1;
      ops.complex_adds += i - j - 1;
      ops.real_mults += 4;
      x(i, j) = -s * inv_ii;
    }
  }
  return x;
}

/// Structure of a whitening matrix; decides which product kernel applies.
enum class MatrixShape { diagonal, lower, dense };

inline MatrixShape classify(const ComplexMatrix& m) {
  if (m.is_diagonal()) return MatrixShape::diagonal;
  if (m.is_lower_triangular()) return MatrixShape::lower;
  return MatrixShape::dense;
}

namespace detail {

/// out = m·in for one column vector of length m.cols(). `in` and `out` must
/// not alias.
inline void apply_vector(const ComplexMatrix& m, MatrixShape shape, const cplx* in, cplx* out, OpCounter& ops) {
  const std::size_t n = m.rows();
  switch (shape) {
    case MatrixShape::diagonal:
      for (std::size_t i = 0; i < n; ++i) out[i] = m(i, i) * in[i];
      ops.complex_mults += n;
      return;
    case MatrixShape::lower:
      for (std::size_t i = 0; i < n; ++i) {
        cplx s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += m(i, k) * in[k];
        out[i] = s;
        ops.complex_mults += i + 1;
        ops.complex_adds += i;
      }
      return;
    case MatrixShape::dense:
      for (std::size_t i = 0; i < n; ++i) {
        cplx s = 0.0;
        for (std::size_t k = 0; k < m.cols(); ++k) s += m(i, k) * in[k];
        out[i] = s;
      }
      ops.complex_mults += n * m.cols();
      ops.complex_adds += n * (m.cols() - 1);
      return;
  }
}

}  // namespace detail

/// Linv·target. A diagonal Linv costs exactly rows·k multiplies.
inline ComplexMatrix whiten_apply(const ComplexMatrix& linv, const ComplexMatrix& target, OpCounter& ops) {
  if (!linv.square() || linv.cols() != target.rows())
    throw Error(Errc::dimension_mismatch, "whitening matrix " + std::to_string(linv.rows()) + "x" +
                                              std::to_string(linv.cols()) + " vs target with " +
                                              std::to_string(target.rows()) + " rows");
  const std::size_t n = target.rows();
  const std::size_t k = target.cols();
  const MatrixShape shape = classify(linv);
  ComplexMatrix out(n, k);
  std::vector<cplx> col(n), res(n);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t r = 0; r < n; ++r) col[r] = target(r, c);
    detail::apply_vector(linv, shape, col.data(), res.data(), ops);
    for (std::size_t r = 0; r < n; ++r) out(r, c) = res[r];
  }
  return out;
}

inline ComplexMatrix whiten_apply(const ComplexMatrix& linv, const ComplexMatrix& target) {
  OpCounter unused;
  return whiten_apply(linv, target, unused);
}

/// (A + Aᴴ)/2 with a real diagonal.
inline HermitianMatrix hermitian_projection(const ComplexMatrix& a) {
  if (!a.square()) throw Error(Errc::not_square, "projection needs a square matrix");
  const std::size_t n = a.rows();
  ComplexMatrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    h(i, i) = a(i, i).real();
    for (std::size_t j = i + 1; j < n; ++j) {
      const cplx v = 0.5 * (a(i, j) + std::conj(a(j, i)));
      h(i, j) = v;
      h(j, i) = std::conj(v);
    }
  }
  return HermitianMatrix(std::move(h));
}

/// Inverse of a small Hermitian positive-definite matrix via its Cholesky
/// factor. Used by the detector; not instrumented.
inline ComplexMatrix hermitian_inverse(const HermitianMatrix& a) {
  OpCounter scratch;
  const CholeskyFactor f = cholesky(a, scratch);
  const ComplexMatrix linv = lower_inverse(f, scratch);
  return linv.adjoint() * linv;
}

}  // namespace iwsel
