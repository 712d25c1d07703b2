#include "tsplit/sparse.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace tsplit {

CsrMatrix::CsrMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("CsrMatrix: negative dimension");
}

CsrMatrix CsrMatrix::from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
  CsrMatrix m(rows, cols);
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw std::out_of_range("CsrMatrix::from_triplets: index out of range");
    }
  }
  // Stable sort keeps the summation order of duplicates deterministic.
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  m.column_indices_.reserve(triplets.size());
  m.values_.reserve(triplets.size());
  std::size_t i = 0;
  for (int r = 0; r < rows; ++r) {
    while (i < triplets.size() && triplets[i].row == r) {
      const int c = triplets[i].col;
      double sum = 0.0;
      while (i < triplets.size() && triplets[i].row == r && triplets[i].col == c) {
        sum += triplets[i].value;
        ++i;
      }
      m.column_indices_.push_back(c);
      m.values_.push_back(sum);
    }
    m.row_offsets_[r + 1] = static_cast<int>(m.column_indices_.size());
  }
  return m;
}

CsrMatrix CsrMatrix::identity(int n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (int i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

double CsrMatrix::coeff(int i, int j) const {
  const auto begin = column_indices_.begin() + row_offsets_[i];
  const auto end = column_indices_.begin() + row_offsets_[i + 1];
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - column_indices_.begin())];
}

void CsrMatrix::multiply(const Vector& x, Vector& y) const {
  if (x.size() != cols_) throw std::invalid_argument("CsrMatrix::multiply: dimension mismatch");
  y.resize(rows_);
  for (int r = 0; r < rows_; ++r) {
    double sum = 0.0;
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) sum += values_[k] * x[column_indices_[k]];
    y[r] = sum;
  }
}

Vector CsrMatrix::operator*(const Vector& x) const {
  Vector y;
  multiply(x, y);
  return y;
}

Vector CsrMatrix::transpose_multiply(const Vector& x) const {
  if (x.size() != rows_) throw std::invalid_argument("CsrMatrix::transpose_multiply: dimension mismatch");
  Vector y = Vector::Zero(cols_);
  for (int r = 0; r < rows_; ++r) {
    const double xr = x[r];
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) y[column_indices_[k]] += values_[k] * xr;
  }
  return y;
}

CsrMatrix CsrMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(values_.size());
  for (int r = 0; r < rows_; ++r) {
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) t.push_back({column_indices_[k], r, values_[k]});
  }
  return from_triplets(cols_, rows_, std::move(t));
}

Vector CsrMatrix::diagonal() const {
  const int n = std::min(rows_, cols_);
  Vector d(n);
  for (int i = 0; i < n; ++i) d[i] = coeff(i, i);
  return d;
}

CsrMatrix CsrMatrix::submatrix(std::span<const int> keep_rows, std::span<const int> keep_cols) const {
  std::vector<int> col_map(cols_, -1);
  for (std::size_t j = 0; j < keep_cols.size(); ++j) col_map[keep_cols[j]] = static_cast<int>(j);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < keep_rows.size(); ++i) {
    const int r = keep_rows[i];
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      const int c = col_map[column_indices_[k]];
      if (c >= 0) t.push_back({static_cast<int>(i), c, values_[k]});
    }
  }
  return from_triplets(static_cast<int>(keep_rows.size()), static_cast<int>(keep_cols.size()), std::move(t));
}

double CsrMatrix::max_asymmetry() const {
  if (rows_ != cols_) throw std::invalid_argument("max_asymmetry: matrix is not square");
  double worst = 0.0;
  for (int r = 0; r < rows_; ++r) {
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      worst = std::max(worst, std::abs(values_[k] - coeff(column_indices_[k], r)));
    }
  }
  return worst;
}

Eigen::MatrixXd CsrMatrix::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows_, cols_);
  for (int r = 0; r < rows_; ++r) {
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) d(r, column_indices_[k]) = values_[k];
  }
  return d;
}

void CsrMatrix::write_coordinate(std::ostream& os) const {
  os << std::setprecision(17);
  for (int r = 0; r < rows_; ++r) {
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      os << r << ' ' << column_indices_[k] << ' ' << values_[k] << '\n';
    }
  }
}

CsrMatrix linear_combination(double a, const CsrMatrix& A, double b, const CsrMatrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw std::invalid_argument("linear_combination: shape mismatch");
  }
  std::vector<Triplet> t;
  t.reserve(A.nonzeros() + B.nonzeros());
  for (const auto* pair : {&A, &B}) {
    const double s = (pair == &A) ? a : b;
    const auto off = pair->row_offsets();
    const auto col = pair->column_indices();
    const auto val = pair->values();
    for (int r = 0; r < pair->rows(); ++r) {
      for (int k = off[r]; k < off[r + 1]; ++k) t.push_back({r, col[k], s * val[k]});
    }
  }
  return CsrMatrix::from_triplets(A.rows(), A.cols(), std::move(t));
}

Vector matvec(const CsrMatrix& A, const Vector& x) { return A * x; }

// ---------------------------------------------------------------------------
// Solvers

void SolverConfig::validate() const {
  if (!(tolerance > 0.0 && tolerance < 1.0)) throw std::invalid_argument("SolverConfig: tolerance must lie in (0, 1)");
  if (max_iterations && *max_iterations < 1) throw std::invalid_argument("SolverConfig: max_iterations must be >= 1");
}

int SolverConfig::iteration_limit(int n) const { return max_iterations.value_or(std::max(10 * n, 1)); }

double relative_residual(const CsrMatrix& A, const Vector& x, const Vector& b) {
  const double bn = b.norm();
  const Vector r = b - A * x;
  if (bn == 0.0) return r.norm();
  return r.norm() / bn;
}

namespace {

using EigenSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

EigenSparse to_eigen(const CsrMatrix& A) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(A.nonzeros());
  const auto off = A.row_offsets();
  const auto col = A.column_indices();
  const auto val = A.values();
  for (int r = 0; r < A.rows(); ++r) {
    for (int k = off[r]; k < off[r + 1]; ++k) t.emplace_back(r, col[k], val[k]);
  }
  EigenSparse m(A.rows(), A.cols());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

void check_square(const CsrMatrix& A, const Vector& b, const char* who) {
  if (A.rows() != A.cols()) throw std::invalid_argument(std::string(who) + ": matrix is not square");
  if (b.size() != A.rows()) throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

// Jacobi-preconditioned CG; the true residual is recomputed whenever the
// recursive one claims convergence.
SolveResult conjugate_gradient(const CsrMatrix& A, const Vector& b, const Vector& inv_diag, const SolverConfig& cfg,
                               Vector x) {
  const int n = A.rows();
  const double bn = b.norm();
  SolveResult res;
  if (bn == 0.0) {
    res.x = Vector::Zero(n);
    return res;
  }
  const int limit = cfg.iteration_limit(n);
  Vector r = b - A * x;
  Vector z = inv_diag.cwiseProduct(r);
  Vector p = z;
  Vector Ap(n);
  double rz = r.dot(z);
  int it = 0;
  double rel = r.norm() / bn;
  while (rel > cfg.tolerance && it < limit) {
    A.multiply(p, Ap);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    ++it;
    rel = r.norm() / bn;
    if (rel <= cfg.tolerance) {
      r = b - A * x;
      rel = r.norm() / bn;
      if (rel <= cfg.tolerance) break;
      z = inv_diag.cwiseProduct(r);
      p = z;
      rz = r.dot(z);
      continue;
    }
    z = inv_diag.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  res.x = std::move(x);
  res.iterations = it;
  res.residual = relative_residual(A, res.x, b);
  if (!(res.residual <= cfg.tolerance)) {
    std::ostringstream msg;
    msg << "conjugate gradient did not converge: residual " << res.residual << " after " << it << " iterations";
    throw SolverError(msg.str(), res.residual, it);
  }
  return res;
}

SolveResult bicgstab(const CsrMatrix& A, const Vector& b, const SolverConfig& cfg) {
  const int n = A.rows();
  const double bn = b.norm();
  SolveResult res;
  res.x = Vector::Zero(n);
  if (bn == 0.0) return res;
  const Vector d = A.diagonal();
  Vector inv_diag(n);
  for (int i = 0; i < n; ++i) inv_diag[i] = d[i] != 0.0 ? 1.0 / d[i] : 1.0;

  const int limit = cfg.iteration_limit(n);
  Vector& x = res.x;
  Vector r = b;
  Vector r_hat = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  Vector v = Vector::Zero(n), p = Vector::Zero(n), s(n), t(n), y(n), z(n);
  int it = 0;
  double rel = 1.0;
  while (it < limit) {
    const double rho_new = r_hat.dot(r);
    if (rho_new == 0.0 || omega == 0.0) {
      // Breakdown: restart from the current iterate.
      r = b - A * x;
      r_hat = r;
      rho = alpha = omega = 1.0;
      v.setZero();
      p.setZero();
      if (r.norm() / bn <= cfg.tolerance) break;
      ++it;
      continue;
    }
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    p = r + beta * (p - omega * v);
    y = inv_diag.cwiseProduct(p);
    A.multiply(y, v);
    alpha = rho / r_hat.dot(v);
    s = r - alpha * v;
    x += alpha * y;
    ++it;
    if (s.norm() / bn <= cfg.tolerance) {
      rel = relative_residual(A, x, b);
      if (rel <= cfg.tolerance) break;
      r = b - A * x;
      r_hat = r;
      rho = alpha = omega = 1.0;
      v.setZero();
      p.setZero();
      continue;
    }
    z = inv_diag.cwiseProduct(s);
    A.multiply(z, t);
    const double tt = t.dot(t);
    omega = tt > 0.0 ? t.dot(s) / tt : 0.0;
    x += omega * z;
    r = s - omega * t;
    if (r.norm() / bn <= cfg.tolerance) {
      rel = relative_residual(A, x, b);
      if (rel <= cfg.tolerance) break;
      r = b - A * x;
    }
  }
  res.iterations = it;
  res.residual = relative_residual(A, x, b);
  if (!(res.residual <= cfg.tolerance) || !std::isfinite(res.residual)) {
    std::ostringstream msg;
    msg << "BiCGSTAB did not converge: residual " << res.residual << " after " << it << " iterations";
    throw SolverError(msg.str(), res.residual, it);
  }
  return res;
}

}  // namespace

struct SpdSolver::Factorization {
  Eigen::SimplicialLLT<EigenSparse, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
};

SpdSolver::SpdSolver(CsrMatrix A, SolverConfig config) : A_(std::move(A)), config_(config) {
  config_.validate();
  if (A_.rows() != A_.cols()) throw std::invalid_argument("SpdSolver: matrix is not square");
  if (config_.method == SolverMethod::direct) {
    factor_ = std::make_unique<Factorization>();
    factor_->llt.compute(to_eigen(A_));
    if (factor_->llt.info() != Eigen::Success) {
      throw SolverError("SpdSolver: Cholesky factorization failed (matrix not positive definite?)", 0.0, 0);
    }
  } else {
    const Vector d = A_.diagonal();
    inv_diagonal_.resize(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (!(d[i] > 0.0)) throw SolverError("SpdSolver: nonpositive diagonal entry", 0.0, 0);
      inv_diagonal_[i] = 1.0 / d[i];
    }
  }
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

SolveResult SpdSolver::solve(const Vector& b) const {
  check_square(A_, b, "SpdSolver::solve");
  if (config_.method == SolverMethod::conjugate_gradient) {
    return conjugate_gradient(A_, b, inv_diagonal_, config_, Vector::Zero(A_.rows()));
  }
  SolveResult res;
  if (b.norm() == 0.0) {
    res.x = Vector::Zero(A_.rows());
    return res;
  }
  res.x = factor_->llt.solve(b);
  res.residual = relative_residual(A_, res.x, b);
  // A few steps of iterative refinement if round-off exceeds the contract.
  for (int refine = 0; refine < 3 && res.residual > config_.tolerance; ++refine) {
    const Vector r = b - A_ * res.x;
    res.x += factor_->llt.solve(r);
    res.residual = relative_residual(A_, res.x, b);
    ++res.iterations;
  }
  if (!(res.residual <= config_.tolerance)) {
    std::ostringstream msg;
    msg << "direct SPD solve missed tolerance: residual " << res.residual;
    throw SolverError(msg.str(), res.residual, res.iterations);
  }
  return res;
}

SolveResult solve_spd(const CsrMatrix& A, const Vector& b, const SolverConfig& config) {
  check_square(A, b, "solve_spd");
  return SpdSolver(A, config).solve(b);
}

SolveResult solve_general(const CsrMatrix& A, const Vector& b, const SolverConfig& config) {
  config.validate();
  check_square(A, b, "solve_general");
  if (config.method == SolverMethod::conjugate_gradient) return bicgstab(A, b, config);

  SolveResult res;
  Eigen::SparseLU<EigenSparse, Eigen::COLAMDOrdering<int>> lu;
  const EigenSparse m = to_eigen(A);
  lu.analyzePattern(m);
  lu.factorize(m);
  if (lu.info() != Eigen::Success) throw SolverError("solve_general: matrix is singular", 0.0, 0);
  res.x = lu.solve(b);
  res.residual = relative_residual(A, res.x, b);
  for (int refine = 0; refine < 3 && res.residual > config.tolerance; ++refine) {
    const Vector r = b - A * res.x;
    res.x += lu.solve(r);
    res.residual = relative_residual(A, res.x, b);
    ++res.iterations;
  }
  if (!std::isfinite(res.residual) || res.residual > config.tolerance) {
    std::ostringstream msg;
    msg << "solve_general: residual " << res.residual << " exceeds tolerance";
    throw SolverError(msg.str(), res.residual, res.iterations);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Generalized eigenvalue: block inverse iteration with Rayleigh-Ritz.

EigenEstimate smallest_generalized_eigenvalue(const CsrMatrix& A, const CsrMatrix& B, double tolerance,
                                              int max_iterations) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows()) {
    throw std::invalid_argument("smallest_generalized_eigenvalue: shape mismatch");
  }
  const int n = A.rows();
  const int block = std::min(n, 6);

  // Shift by a multiple of B when A is only semidefinite.
  double shift = 0.0;
  Eigen::SimplicialLLT<EigenSparse, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
  const EigenSparse a = to_eigen(A);
  const EigenSparse bm = to_eigen(B);
  llt.compute(a);
  if (llt.info() != Eigen::Success) {
    shift = 1e-8 * (A.diagonal().sum() / B.diagonal().sum());
    llt.compute(a + shift * bm);
    if (llt.info() != Eigen::Success) {
      throw EigenSolverError("smallest_generalized_eigenvalue: shifted factorization failed", {});
    }
  }

  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd X(n, block);
  for (int j = 0; j < block; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = dist(rng);

  EigenEstimate best;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::MatrixXd BX = bm * X;
    // Near a kernel the iterates collapse onto one direction; an orthonormal
    // basis keeps the projected pencil well conditioned.
    const Eigen::MatrixXd Z = llt.solve(BX);
    const Eigen::MatrixXd Y = Eigen::HouseholderQR<Eigen::MatrixXd>(Z).householderQ() * Eigen::MatrixXd::Identity(n, block);
    const Eigen::MatrixXd AY = a * Y;
    const Eigen::MatrixXd BY = bm * Y;
    Eigen::MatrixXd Ar = Y.transpose() * AY;
    Eigen::MatrixXd Br = Y.transpose() * BY;
    Ar = 0.5 * (Ar + Ar.transpose()).eval();
    Br = 0.5 * (Br + Br.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ritz(Ar, Br);
    if (ritz.info() != Eigen::Success) {
      throw EigenSolverError("smallest_generalized_eigenvalue: Rayleigh-Ritz step failed", best);
    }
    X = Y * ritz.eigenvectors();
    const Eigen::VectorXd x = X.col(0);
    const double lambda = ritz.eigenvalues()(0);
    const Eigen::VectorXd Ax = a * x;
    const Eigen::VectorXd Bx = bm * x;
    best.value = lambda;
    best.vector = x / std::sqrt(x.dot(Bx));
    best.iterations = it;
    // Scales relative to the block's largest Ritz value so that a zero
    // eigenvalue can converge.
    const double scale = std::max(std::abs(lambda), ritz.eigenvalues()(block - 1));
    best.residual = (Ax - lambda * Bx).norm() / std::max(scale * Bx.norm(), std::numeric_limits<double>::min());
    const double change = std::abs(lambda - previous) / std::max(scale, 1e-300);
    if (change <= 0.1 * tolerance && best.residual <= std::sqrt(tolerance)) return best;
    previous = lambda;
  }
  throw EigenSolverError("smallest_generalized_eigenvalue: no convergence", best);
}

}  // namespace tsplit
