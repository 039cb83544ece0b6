#include "dpcmf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "dpcmf/errors.hpp"

namespace dpcmf {

namespace {

void require_square(const DenseMatrix& a) {
  if (a.rows() != a.cols()) {
    throw ContractViolationError("non-square-matrix", "");
  }
}

// In-place lower Cholesky factorization. Returns false when the matrix is
// not numerically positive definite; rel_floor sets how small a pivot may
// get relative to the largest diagonal entry before giving up.
bool cholesky_inplace(DenseMatrix& m, double rel_floor = 1e-13) {
  const std::size_t n = m.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_diag = std::max(max_diag, std::abs(m(i, i)));
  }
  const double pivot_floor = rel_floor * max_diag;
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) {
      d -= m(j, k) * m(j, k);
    }
    if (!(d > pivot_floor) || !std::isfinite(d)) {
      return false;
    }
    const double root = std::sqrt(d);
    m(j, j) = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) {
        s -= m(i, k) * m(j, k);
      }
      m(i, j) = s / root;
    }
  }
  return true;
}

DenseVector cholesky_solve(const DenseMatrix& chol, const DenseVector& b) {
  const std::size_t n = chol.rows();
  DenseVector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) {
      s -= chol(i, k) * x[k];
    }
    x[i] = s / chol(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t k = i + 1; k < n; ++k) {
      s -= chol(k, i) * x[k];
    }
    x[i] = s / chol(i, i);
  }
  return x;
}

double offdiag_sq(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  double s = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      s += 2.0 * a(p, q) * a(p, q);
    }
  }
  return s;
}

}  // namespace

DenseMatrix DenseMatrix::identity(std::size_t dim) {
  DenseMatrix m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    m(i, i) = 1.0;
  }
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

void add_scaled(std::span<double> y, double s, std::span<const double> x) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] += s * x[i];
  }
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

double euclidean_norm(std::span<const double> v) {
  return std::sqrt(squared_norm(v));
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      return false;
    }
  }
  return true;
}

double frobenius_sq(const DenseMatrix& a) { return squared_norm(a.data()); }

double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
  return dot(a.data(), b.data());
}

double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (double x : a.data()) {
    m = std::max(m, std::abs(x));
  }
  return m;
}

bool is_symmetric(const DenseMatrix& a, double tol) {
  if (a.rows() != a.cols()) {
    return false;
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      if (std::abs(a(i, j) - a(j, i)) > tol) {
        return false;
      }
    }
  }
  return true;
}

void add_weighted_outer(DenseMatrix& a, double w, std::span<const double> x) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double wxi = w * x[i];
    double* row = a.row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      row[j] += wxi * x[j];
    }
  }
}

void add_diagonal(DenseMatrix& a, double s) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    a(i, i) += s;
  }
}

void add_scaled_matrix(DenseMatrix& y, double s, const DenseMatrix& x) {
  auto yd = y.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < yd.size(); ++i) {
    yd[i] += s * xd[i];
  }
}

DenseVector matvec(const DenseMatrix& a, const DenseVector& x) {
  DenseVector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    y[i] = dot(a.row(i), x.entries());
  }
  return y;
}

DenseMatrix gramian(const DenseMatrix& x) {
  DenseMatrix g(x.cols(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    add_weighted_outer(g, 1.0, x.row(r));
  }
  return g;
}

SymmetricEigen eigendecompose_symmetric(const DenseMatrix& input) {
  require_square(input);
  const std::size_t n = input.rows();
  DenseMatrix a = input;
  DenseMatrix v = DenseMatrix::identity(n);

  const double scale = std::sqrt(frobenius_sq(a));
  const double stop = 1e-13 * std::max(scale, 1e-300);
  constexpr int kMaxSweeps = 100;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (std::sqrt(offdiag_sq(a)) <= stop) {
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) {
          continue;
        }
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = tau >= 0.0
                             ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                             : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // a ← Jᵀ a J with J the (p, q) rotation.
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymmetricEigen out;
  out.values = DenseVector(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a(i, i);
  }
  out.vectors = std::move(v);
  return out;
}

DenseVector ridge_solve(const DenseMatrix& a, const DenseVector& b,
                        double reg) {
  require_square(a);
  if (a.rows() != b.size()) {
    throw ContractViolationError("dimension-mismatch", "ridge_solve");
  }
  if (reg < 0.0) {
    throw ContractViolationError("negative-regularization", "");
  }

  DenseMatrix shifted = a;
  add_diagonal(shifted, reg);

  DenseMatrix chol = shifted;
  if (cholesky_inplace(chol)) {
    DenseVector x = cholesky_solve(chol, b);
    // One refinement step keeps the residual at working precision even for
    // moderately ill-conditioned systems.
    DenseVector r = b;
    add_scaled(r.entries(), -1.0, matvec(shifted, x).entries());
    DenseVector dx = cholesky_solve(chol, r);
    add_scaled(x.entries(), 1.0, dx.entries());
    return x;
  }

  // Symmetric indefinite or not numerically PD: fall back to the spectral
  // route, which also detects genuine singularity. With reg > 0 and a PSD
  // input the shifted system cannot be singular, so only eigenvalues at the
  // level of pure roundoff are treated as rank deficiency there.
  const SymmetricEigen eig = eigendecompose_symmetric(shifted);
  const std::size_t n = b.size();
  double max_mag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_mag = std::max(max_mag, std::abs(eig.values[i]));
  }
  if (max_mag == 0.0) {
    throw SingularSystemError("singular-system", "zero matrix");
  }
  const double singular_tol = (reg > 0.0 ? 1e-15 : 1e-12) * max_mag;
  DenseVector x(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lambda = eig.values[k];
    if (std::abs(lambda) <= singular_tol) {
      throw SingularSystemError("singular-system",
                                "rank-deficient system with reg = " +
                                    std::to_string(reg));
    }
    double proj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      proj += eig.vectors(i, k) * b[i];
    }
    const double coef = proj / lambda;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += coef * eig.vectors(i, k);
    }
  }
  return x;
}

DenseMatrix project_psd(const DenseMatrix& a) {
  require_square(a);
  const double tol = 1e-12 * std::max(1.0, max_abs(a));
  if (!is_symmetric(a, tol)) {
    throw ContractViolationError("non-symmetric-input", "project_psd");
  }
  const SymmetricEigen eig = eigendecompose_symmetric(a);
  const std::size_t n = a.rows();
  // Eigenvalues within roundoff of zero count as nonnegative; this keeps
  // the projection exactly idempotent and leaves PSD inputs untouched.
  const double psd_tol =
      1e-12 * std::max(1.0, std::sqrt(frobenius_sq(a)));
  bool already_psd = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (eig.values[i] < -psd_tol) {
      already_psd = false;
      break;
    }
  }
  if (already_psd) {
    return a;
  }
  DenseMatrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lambda = eig.values[k];
    if (lambda <= 0.0) {
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double li = lambda * eig.vectors(i, k);
      for (std::size_t j = i; j < n; ++j) {
        out(i, j) += li * eig.vectors(j, k);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out(j, i) = out(i, j);
    }
  }
  return out;
}

DenseVector solve_psd_system(const DenseMatrix& a, const DenseVector& b,
                             double eigenvalue_floor) {
  require_square(a);
  if (a.rows() != b.size()) {
    throw ContractViolationError("dimension-mismatch", "solve_psd_system");
  }
  DenseMatrix chol = a;
  // Pivots of a numerically singular matrix can land near sqrt(eps) times
  // the scale, so the gate into the fast path sits two orders above that.
  if (cholesky_inplace(chol, 1e-6)) {
    return cholesky_solve(chol, b);
  }
  // Not comfortably positive definite: solve on the well-determined part of
  // the spectrum. Eigen-directions below the floor carry no information once
  // the projection has flattened the spectrum there, and inverting them
  // would amplify whatever noise landed in b along them, so they contribute
  // nothing instead.
  const SymmetricEigen eig = eigendecompose_symmetric(a);
  const std::size_t n = b.size();
  double max_mag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_mag = std::max(max_mag, std::abs(eig.values[i]));
  }
  DenseVector x(n);
  if (max_mag == 0.0) {
    return x;
  }
  const double cutoff = std::max(1e-8 * max_mag, eigenvalue_floor);
  for (std::size_t k = 0; k < n; ++k) {
    const double lambda = eig.values[k];
    if (lambda <= cutoff) {
      continue;
    }
    double proj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      proj += eig.vectors(i, k) * b[i];
    }
    const double coef = proj / lambda;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += coef * eig.vectors(i, k);
    }
  }
  return x;
}

}  // namespace dpcmf
