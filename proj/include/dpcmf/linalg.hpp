#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dpcmf {

class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t dim, double fill = 0.0)
      : entries_(dim, fill) {}
  DenseVector(std::initializer_list<double> values) : entries_(values) {}

  std::size_t size() const { return entries_.size(); }
  double operator[](std::size_t i) const { return entries_[i]; }
  double& operator[](std::size_t i) { return entries_[i]; }
  std::span<const double> entries() const { return entries_; }
  std::span<double> entries() { return {entries_.data(), entries_.size()}; }

  bool operator==(const DenseVector&) const = default;

 private:
  std::vector<double> entries_;
};

// Row-major dense matrix. Rows are the natural unit of access: embedding
// tables hand out `row(i)` spans to the update kernels.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), entries_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t dim);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const {
    return entries_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return entries_[r * cols_ + c];
  }
  std::span<const double> row(std::size_t r) const {
    return {entries_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) {
    return {entries_.data() + r * cols_, cols_};
  }
  std::span<const double> data() const { return entries_; }
  std::span<double> data() { return {entries_.data(), entries_.size()}; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

double dot(std::span<const double> a, std::span<const double> b);
// y += s * x
void add_scaled(std::span<double> y, double s, std::span<const double> x);
double squared_norm(std::span<const double> v);
double euclidean_norm(std::span<const double> v);
bool all_finite(std::span<const double> v);

double frobenius_sq(const DenseMatrix& a);
// Frobenius inner product <a, b> = sum_ij a_ij b_ij.
double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b);
double max_abs(const DenseMatrix& a);
bool is_symmetric(const DenseMatrix& a, double tol);

// a += w * (x ⊗ x)
void add_weighted_outer(DenseMatrix& a, double w, std::span<const double> x);
void add_diagonal(DenseMatrix& a, double s);
// y += s * x, elementwise
void add_scaled_matrix(DenseMatrix& y, double s, const DenseMatrix& x);
DenseVector matvec(const DenseMatrix& a, const DenseVector& x);
// XᵀX over the rows of x.
DenseMatrix gramian(const DenseMatrix& x);

// Full symmetric eigendecomposition, a = vectors · diag(values) · vectorsᵀ,
// with eigenvectors in the columns. Cyclic Jacobi; off-diagonal convergence
// to 1e-12 relative. Suited to the small (d ≤ a few hundred) systems used
// by the alternating updates.
struct SymmetricEigen {
  DenseVector values;
  DenseMatrix vectors;
};
SymmetricEigen eigendecompose_symmetric(const DenseMatrix& a);

// Solves (a + reg·I) x = b for symmetric a. Throws SingularSystemError when
// the shifted system is numerically singular.
DenseVector ridge_solve(const DenseMatrix& a, const DenseVector& b,
                        double reg);

// Frobenius-nearest positive semidefinite matrix: eigendecompose, clamp
// negative eigenvalues to zero, reconstruct. Inputs that are already PSD are
// returned unchanged. Throws ContractViolationError on non-symmetric input.
DenseMatrix project_psd(const DenseMatrix& a);

// Solution of a x = b for symmetric PSD a, which may be exactly singular
// (PSD projection zeroes eigenvalues). Positive definite systems solve via
// Cholesky; otherwise the solve keeps only eigen-directions above
// max(1e-8 relative, eigenvalue_floor) and returns the minimum-norm
// solution there instead of amplifying noise-dominated directions.
DenseVector solve_psd_system(const DenseMatrix& a, const DenseVector& b,
                             double eigenvalue_floor = 0.0);

}  // namespace dpcmf
