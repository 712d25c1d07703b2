#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsplit {

using Vector = Eigen::VectorXd;

struct Triplet {
  int row;
  int col;
  double value;
};

/// Compressed-row sparse matrix.  Column indices are sorted and unique within
/// each row.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(int rows, int cols);

  /// Duplicates are summed in insertion order, so the result does not depend
  /// on anything but the triplet sequence.
  static CsrMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets);
  static CsrMatrix identity(int n);

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] std::size_t nonzeros() const { return values_.size(); }

  [[nodiscard]] std::span<const int> row_offsets() const { return row_offsets_; }
  [[nodiscard]] std::span<const int> column_indices() const { return column_indices_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }

  /// Entry (i, j), zero when not stored.
  [[nodiscard]] double coeff(int i, int j) const;

  void multiply(const Vector& x, Vector& y) const;
  [[nodiscard]] Vector operator*(const Vector& x) const;
  /// y = A^T x without forming the transpose.
  [[nodiscard]] Vector transpose_multiply(const Vector& x) const;

  [[nodiscard]] CsrMatrix transpose() const;
  [[nodiscard]] Vector diagonal() const;
  /// Keeps rows/columns whose indices are listed (in the given order).
  [[nodiscard]] CsrMatrix submatrix(std::span<const int> keep_rows, std::span<const int> keep_cols) const;
  /// Largest |A_ij - A_ji|.
  [[nodiscard]] double max_asymmetry() const;
  [[nodiscard]] Eigen::MatrixXd to_dense() const;

  /// Coordinate text export, one "row col value" per line.
  void write_coordinate(std::ostream& os) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_offsets_{0};
  std::vector<int> column_indices_;
  std::vector<double> values_;
};

/// a * A + b * B for matrices of equal shape.
CsrMatrix linear_combination(double a, const CsrMatrix& A, double b, const CsrMatrix& B);

Vector matvec(const CsrMatrix& A, const Vector& x);

enum class SolverMethod { conjugate_gradient, direct };

struct SolverConfig {
  SolverMethod method = SolverMethod::conjugate_gradient;
  double tolerance = 1e-12;
  std::optional<int> max_iterations;  // default 10 * n

  void validate() const;
  [[nodiscard]] int iteration_limit(int n) const;
};

/// Raised when a solve misses its residual contract.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  [[nodiscard]] double residual() const { return residual_; }
  [[nodiscard]] int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

struct SolveResult {
  Vector x;
  double residual = 0.0;  // ||Ax - b|| / ||b||
  int iterations = 0;
};

double relative_residual(const CsrMatrix& A, const Vector& x, const Vector& b);

/// Solver for a fixed symmetric positive definite matrix.  With the direct
/// method the factorization is computed once at construction; solve() is
/// const and reentrant.
class SpdSolver {
 public:
  SpdSolver(CsrMatrix A, SolverConfig config);
  ~SpdSolver();
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;

  [[nodiscard]] SolveResult solve(const Vector& b) const;
  [[nodiscard]] const CsrMatrix& matrix() const { return A_; }
  [[nodiscard]] const SolverConfig& config() const { return config_; }

 private:
  struct Factorization;
  CsrMatrix A_;
  SolverConfig config_;
  Vector inv_diagonal_;
  std::unique_ptr<Factorization> factor_;
};

SolveResult solve_spd(const CsrMatrix& A, const Vector& b, const SolverConfig& config = {});

/// Nonsymmetric solve: BiCGSTAB for the iterative method, sparse LU for the
/// direct one.
SolveResult solve_general(const CsrMatrix& A, const Vector& b, const SolverConfig& config = {});

struct EigenEstimate {
  double value = 0.0;
  Vector vector;
  double residual = 0.0;
  int iterations = 0;
};

class EigenSolverError : public std::runtime_error {
 public:
  EigenSolverError(const std::string& what, EigenEstimate best)
      : std::runtime_error(what), best_(std::move(best)) {}
  [[nodiscard]] const EigenEstimate& best_estimate() const { return best_; }

 private:
  EigenEstimate best_;
};

/// Smallest lambda with A x = lambda B x by shifted inverse iteration.
/// A symmetric positive semidefinite, B symmetric positive definite.
EigenEstimate smallest_generalized_eigenvalue(const CsrMatrix& A, const CsrMatrix& B, double tolerance = 1e-10,
                                              int max_iterations = 2000);

}  // namespace tsplit
